//! Browser bindings: train the toy ontology, query the trained model, and
//! explore the correlation of two 1-D intervals.

use wasm_bindgen::prelude::*;

use boxlat::data::{cpd_examples, toy_dataset, ToySpec};
use boxlat::train::Init;
use boxlat::{conditional_query, fit, HyperBox, Model, ProductMeasure, Query, TrainConfig};

/// Settings shared with the command-line toy run, shortened for the browser.
pub fn toy_config(poe: bool, seed: u64, epochs: usize, examples: usize) -> TrainConfig {
    TrainConfig {
        dim: 2,
        learning_rate: 0.01,
        epochs,
        batch_size: examples,
        poe_mode: poe,
        seed,
        ..TrainConfig::default()
    }
}

pub fn train_toy(poe: bool, seed: u64, epochs: usize) -> Result<(Model, f64), String> {
    let spec = ToySpec::default_spec();
    let table = toy_dataset(&spec).map_err(|e| e.to_string())?;
    let data = cpd_examples(&table);
    let cfg = toy_config(poe, seed, epochs.max(1), data.len());
    let r = fit(spec.vocab(), &data, &cfg, Init::Random, None).map_err(|e| e.to_string())?;
    let loss = r.log.last().map(|l| l.loss).unwrap_or(f64::NAN);
    Ok((r.model, loss))
}

pub fn query(model: &Model, target: &str, given: &str) -> Result<f64, String> {
    let t = Query::parse(target).map_err(|e| e.to_string())?;
    if t.is_empty() {
        return Err("target is empty".into());
    }
    let g = Query::parse(given).map_err(|e| e.to_string())?;
    conditional_query(model, &t, &g).map_err(|e| e.to_string())
}

/// `[P(a), P(b), P(a and b), correlation]` for intervals `[a_lo, a_hi]` and
/// `[b_lo, b_hi]` under the uniform measure on `[0, 1]`.
pub fn interval_stats(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> Result<[f64; 4], String> {
    let m = ProductMeasure::uniform(1);
    let mk = |lo: f64, hi: f64| {
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(format!("interval [{lo}, {hi}] must lie inside [0, 1]"));
        }
        HyperBox::new(vec![lo], vec![hi - lo]).map_err(|e| e.to_string())
    };
    let (a, b) = (mk(a_lo, a_hi)?, mk(b_lo, b_hi)?);
    let pab = a.meet(&b).map_err(|e| e.to_string())?.volume(&m);
    let r = boxlat::correlation(&a, &b, &m).map_err(|e| e.to_string())?;
    Ok([a.volume(&m), b.volume(&m), pab, r])
}

fn js_err(e: String) -> JsError {
    JsError::new(&e)
}

/// Holds the most recently trained model.
#[wasm_bindgen]
pub struct Demo {
    model: Option<Model>,
    loss: f64,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo { model: None, loss: f64::NAN }
    }

    /// Trains the toy ontology in 2-D and returns the SVG drawing.
    pub fn train(&mut self, poe: bool, seed: u32, epochs: u32) -> Result<String, JsError> {
        let (model, loss) = train_toy(poe, seed as u64, epochs as usize).map_err(js_err)?;
        let svg = boxlat::plot::render_svg(&model).map_err(|e| js_err(e.to_string()))?;
        self.model = Some(model);
        self.loss = loss;
        Ok(svg)
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Concept names, comma separated.
    pub fn concepts(&self) -> String {
        self.model.as_ref().map(|m| m.vocab().names().join(",")).unwrap_or_default()
    }

    /// `P(target | given)`; both are comma lists with `!` for negation.
    pub fn query(&self, target: &str, given: &str) -> Result<f64, JsError> {
        let m = self.model.as_ref().ok_or_else(|| js_err("train a model first".into()))?;
        query(m, target, given).map_err(js_err)
    }
}

impl Default for Demo {
    fn default() -> Self {
        Demo::new()
    }
}

#[wasm_bindgen(js_name = intervalStats)]
pub fn interval_stats_js(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> Result<Vec<f64>, JsError> {
    interval_stats(a_lo, a_hi, b_lo, b_hi).map(|s| s.to_vec()).map_err(js_err)
}
