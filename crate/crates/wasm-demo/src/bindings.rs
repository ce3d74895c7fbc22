use wasm_bindgen::prelude::*;

use crate::{DemoConfig, Session};

fn js_err(e: recourse_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = Demo)]
pub struct Demo(Session);

#[wasm_bindgen(js_class = Demo)]
impl Demo {
    /// Generates data and trains both models; takes a few seconds.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<Demo, JsError> {
        let config = DemoConfig {
            seed,
            ..DemoConfig::default()
        };
        Session::train(config).map(Demo).map_err(js_err)
    }

    #[wasm_bindgen(js_name = schemaJson)]
    pub fn schema_json(&self) -> String {
        self.0.schema_json()
    }

    #[wasm_bindgen(js_name = rejectedProfile)]
    pub fn rejected_profile(&self, k: usize) -> Result<String, JsError> {
        self.0.rejected_profile_json(k).map_err(js_err)
    }

    pub fn score(&self, profile: &str) -> Result<String, JsError> {
        self.0.score_json(profile).map_err(js_err)
    }

    pub fn counterfactual(&self, profile: &str, method: &str) -> Result<String, JsError> {
        self.0.counterfactual_json(profile, method).map_err(js_err)
    }
}
