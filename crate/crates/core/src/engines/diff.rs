use serde::{Deserialize, Serialize};

use super::finalize::CfResult;
use crate::error::{Error, Result};
use crate::profiles::{ProfileSchema, RawProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub feature: String,
    pub old: f64,
    pub delta: f64,
    pub new: f64,
}

/// Per-feature edits that turn the input profile into the counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackDiff {
    pub entries: Vec<DiffEntry>,
    pub score_before: f64,
    pub score_after: f64,
}

pub fn make_diff(x: &RawProfile, result: &CfResult, schema: &ProfileSchema) -> Result<FeedbackDiff> {
    let old = x.values();
    let new = result.x_cf_raw.values();
    if old.len() != schema.len() || new.len() != schema.len() {
        return Err(Error::spec("diff operands do not match the schema width"));
    }
    let mut entries = Vec::new();
    for ((f, &o), &n) in schema.features().iter().zip(old).zip(new) {
        if o == n {
            continue;
        }
        if !f.mutable {
            return Err(Error::spec(format!(
                "immutable feature `{}` changed; result was not finalized from this input",
                f.name
            )));
        }
        let delta = n - o;
        if o + delta != n {
            return Err(Error::numeric(format!(
                "delta for `{}` does not replay exactly",
                f.name
            )));
        }
        entries.push(DiffEntry {
            feature: f.name.clone(),
            old: o,
            delta,
            new: n,
        });
    }
    Ok(FeedbackDiff {
        entries,
        score_before: result.score_before,
        score_after: result.score_after,
    })
}

impl FeedbackDiff {
    /// Applies the deltas to `x`.
    pub fn apply(&self, x: &RawProfile, schema: &ProfileSchema) -> Result<RawProfile> {
        let mut out = x.clone();
        for e in &self.entries {
            let j = schema
                .index_of(&e.feature)
                .ok_or_else(|| Error::schema(format!("unknown feature `{}`", e.feature)))?;
            out.0[j] += e.delta;
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
