use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BanditAlgorithm, BanditState, HistoryScope};
use crate::error::{Error, Result};
use crate::numerics::Tolerances;

pub const STATE_FORMAT: &str = "rmbandit-bandit-state";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigEcho {
    algorithm: String,
    num_arms: usize,
    context_dim: Option<usize>,
    history_scope: HistoryScope,
    alpha: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    config: ConfigEcho,
    state: BanditState,
}

fn echo(state: &BanditState) -> ConfigEcho {
    let (alpha, gamma) = match &state.algorithm {
        BanditAlgorithm::LinUcb(b) => (Some(b.alpha), None),
        BanditAlgorithm::Exp3(b) => (None, Some(b.gamma)),
    };
    ConfigEcho {
        algorithm: state.algorithm.tag().to_string(),
        num_arms: state.num_arms(),
        context_dim: state.context_dim(),
        history_scope: state.history_scope,
        alpha,
        gamma,
    }
}

/// Writes the versioned JSON document. The file is written to a sibling
/// temporary path and renamed into place.
pub fn save_bandit(state: &BanditState, path: &Path) -> Result<()> {
    let doc = Document {
        format: STATE_FORMAT.to_string(),
        version: STATE_VERSION,
        config: echo(state),
        state: state.clone(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_bandit(path: &Path) -> Result<BanditState> {
    let fail = |message: String| Error::Load {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let doc: Document = serde_json::from_str(&text).map_err(|e| fail(format!("malformed document: {e}")))?;
    if doc.format != STATE_FORMAT {
        return Err(fail(format!("unexpected format tag {:?}", doc.format)));
    }
    if doc.version != STATE_VERSION {
        return Err(fail(format!(
            "state version {} is not supported (expected {STATE_VERSION})",
            doc.version
        )));
    }
    validate(&doc.state).map_err(fail)?;
    if echo(&doc.state) != doc.config {
        return Err(fail("config echo does not match the stored state".into()));
    }
    Ok(doc.state)
}

fn validate(state: &BanditState) -> std::result::Result<(), String> {
    let arms = state.num_arms();
    if arms == 0 {
        return Err("state has no arms".into());
    }
    let expected_normalizers = match state.history_scope {
        HistoryScope::Global => 1,
        HistoryScope::PerArm => arms,
    };
    if state.normalizers.len() != expected_normalizers {
        return Err(format!(
            "expected {expected_normalizers} reward histories, found {}",
            state.normalizers.len()
        ));
    }
    for n in &state.normalizers {
        if !n.history.iter().all(|v| v.is_finite()) {
            return Err("reward history contains non-finite values".into());
        }
        if !(0.0..=1.0).contains(&n.q_lo_level) || !(n.q_lo_level..=1.0).contains(&n.q_hi_level) {
            return Err("invalid quantile levels".into());
        }
    }
    match &state.algorithm {
        BanditAlgorithm::LinUcb(b) => {
            if !(b.alpha >= 0.0) {
                return Err(format!("invalid alpha {}", b.alpha));
            }
            let dim = b.arms[0].b.dim();
            for (k, arm) in b.arms.iter().enumerate() {
                if arm.b.dim() != dim || arm.a_inv.dim() != dim {
                    return Err(format!("arm {k} has inconsistent dimensions"));
                }
                if arm.a_inv.as_row_major().len() != dim * dim {
                    return Err(format!("arm {k} matrix has the wrong number of entries"));
                }
                if !arm.b.is_finite() || !arm.a_inv.as_row_major().iter().all(|x| x.is_finite()) {
                    return Err(format!("arm {k} contains non-finite values"));
                }
                if !arm.a_inv.is_symmetric(Tolerances::DEFAULT.symmetry) {
                    return Err(format!("arm {k} inverse is not symmetric"));
                }
            }
        }
        BanditAlgorithm::Exp3(s) => {
            if !(0.0..=1.0).contains(&s.gamma) {
                return Err(format!("invalid gamma {}", s.gamma));
            }
            if !s.scores.is_finite() {
                return Err("Exp3 scores contain non-finite values".into());
            }
        }
    }
    Ok(())
}
