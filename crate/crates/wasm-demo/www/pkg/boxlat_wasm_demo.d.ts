/* tslint:disable */
/* eslint-disable */

/**
 * Holds the most recently trained model.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Concept names, comma separated.
     */
    concepts(): string;
    loss(): number;
    constructor();
    /**
     * `P(target | given)`; both are comma lists with `!` for negation.
     */
    query(target: string, given: string): number;
    /**
     * Trains the toy ontology in 2-D and returns the SVG drawing.
     */
    train(poe: boolean, seed: number, epochs: number): string;
}

export function intervalStats(a_lo: number, a_hi: number, b_lo: number, b_hi: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_concepts: (a: number) => [number, number];
    readonly demo_loss: (a: number) => number;
    readonly demo_new: () => number;
    readonly demo_query: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demo_train: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly intervalStats: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
