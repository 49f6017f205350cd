//! Per-record feature attribution: normalized relevance, ranking, and the
//! JSON form shared by every explainer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shap::ShapConfig;

/// Which explainer produced an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMethod {
    Rxp,
    KernelShap,
    ExactShapley,
}

/// Extra output carried by Shapley-based explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapDetail {
    /// Signed attribution per feature (before normalization).
    pub phi_raw: Vec<f64>,
    /// Base value: mean score over the background set.
    pub phi0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ShapConfig>,
}

/// Feature attribution for one record.
///
/// `relevance` is non-negative and sums to 1; `ranking` lists feature
/// indices by descending relevance with ties broken by ascending index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: ExplainMethod,
    pub relevance: Vec<f64>,
    pub ranking: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zscores: Option<Vec<f64>>,
    /// Wall-clock time of the producing call; omitted from serialized output
    /// when byte-identical artifacts are required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ns: Option<u64>,
    #[serde(default, flatten, skip_serializing_if = "Option::is_none")]
    pub shap: Option<ShapDetail>,
}

impl Explanation {
    /// First `k` ranked features with their relevance weights.
    pub fn top_k(&self, k: usize) -> Result<Vec<(usize, f64)>> {
        let m = self.relevance.len();
        if k == 0 || k > m {
            return Err(Error::InvalidArgument(format!(
                "k must lie in 1..={}, got {}",
                m, k
            )));
        }
        Ok(self.ranking[..k]
            .iter()
            .map(|&i| (i, self.relevance[i]))
            .collect())
    }
}

/// Indices sorted by descending value; ties broken by ascending index.
pub fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expl(relevance: Vec<f64>) -> Explanation {
        Explanation {
            method: ExplainMethod::Rxp,
            ranking: rank_desc(&relevance),
            relevance,
            zscores: None,
            elapsed_ns: None,
            shap: None,
        }
    }

    #[test]
    fn ranking_is_descending_with_index_tiebreak() {
        assert_eq!(rank_desc(&[0.2, 0.5, 0.2, 0.1]), vec![1, 0, 2, 3]);
        assert_eq!(rank_desc(&[0.25, 0.25, 0.25, 0.25]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn top_k_returns_ranked_pairs() {
        let e = expl(vec![0.7, 0.2, 0.1]);
        assert_eq!(e.top_k(2).unwrap(), vec![(0, 0.7), (1, 0.2)]);
        assert_eq!(
            e.top_k(3).unwrap(),
            vec![(0, 0.7), (1, 0.2), (2, 0.1)]
        );
    }

    #[test]
    fn top_k_of_uniform_relevance_follows_index_order() {
        let e = expl(vec![0.25; 4]);
        let top: Vec<usize> = e.top_k(3).unwrap().into_iter().map(|(i, _)| i).collect();
        assert_eq!(top, vec![0, 1, 2]);
    }

    #[test]
    fn top_k_rejects_out_of_range_k() {
        let e = expl(vec![0.5, 0.5]);
        assert!(matches!(e.top_k(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(e.top_k(3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn json_round_trip_without_shap_detail_omits_its_fields() {
        let e = expl(vec![1.0]);
        let json = serde_json::to_string(&e).unwrap();
        assert!(!json.contains("phi_raw"));
        assert!(!json.contains("elapsed_ns"));
        let back: Explanation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn json_round_trip_with_shap_detail() {
        let mut e = expl(vec![0.6, 0.4]);
        e.method = ExplainMethod::KernelShap;
        e.shap = Some(ShapDetail {
            phi_raw: vec![-0.3, 0.2],
            phi0: 0.05,
            config: Some(ShapConfig {
                n_coalition_samples: 80,
                n_background: 10,
                seed: 1,
            }),
        });
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"method\":\"kernel_shap\""));
        assert!(json.contains("phi0"));
        let back: Explanation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }
}
