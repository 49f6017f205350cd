//! Minimal SVG rendering of per-feature relevance as a horizontal bar
//! chart, with no drawing dependencies. Bars are sorted by relevance and
//! ground-truth causes (when provided) are highlighted.

use crate::error::{Error, Result};
use crate::explanation::Explanation;

/// Chart knobs; the defaults produce a readable report-sized figure.
#[derive(Debug, Clone)]
pub struct ChartOptions {
    /// Number of top-ranked features to draw.
    pub top_n: usize,
    pub width: u32,
    pub bar_height: u32,
    pub title: String,
}

impl Default for ChartOptions {
    fn default() -> Self {
        Self {
            top_n: 15,
            width: 640,
            bar_height: 22,
            title: "Per-feature relevance".into(),
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the top-ranked relevance scores of `explanation` as an SVG
/// document. `feature_names` must cover every feature index; indices listed
/// in `highlight` (ground-truth causes, typically) are drawn in a distinct
/// fill with a legend note.
pub fn relevance_chart(
    explanation: &Explanation,
    feature_names: &[String],
    highlight: &[usize],
    opts: &ChartOptions,
) -> Result<String> {
    let m = explanation.relevance.len();
    if feature_names.len() != m {
        return Err(Error::DimensionError(format!(
            "{} feature names for {} relevance scores",
            feature_names.len(),
            m
        )));
    }
    if opts.top_n == 0 || opts.width < 200 || opts.bar_height < 8 {
        return Err(Error::InvalidArgument(
            "chart needs top_n >= 1, width >= 200, bar_height >= 8".into(),
        ));
    }

    let shown: Vec<usize> = explanation
        .ranking
        .iter()
        .copied()
        .take(opts.top_n)
        .collect();
    if shown.is_empty() {
        return Err(Error::InvalidArgument("explanation ranks no features".into()));
    }
    let max_rel = shown
        .iter()
        .map(|&i| explanation.relevance[i])
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    const MARGIN_TOP: u32 = 48;
    const MARGIN_BOTTOM: u32 = 16;
    const LABEL_WIDTH: u32 = 220;
    const VALUE_WIDTH: u32 = 64;
    const GAP: u32 = 6;
    let bar_area = opts.width.saturating_sub(LABEL_WIDTH + VALUE_WIDTH + 24);
    let height = MARGIN_TOP + shown.len() as u32 * (opts.bar_height + GAP) + MARGIN_BOTTOM;

    let mut svg = String::new();
    svg.push_str(&format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"12\">\n"
        ),
        w = opts.width,
        h = height
    ));
    svg.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        opts.width, height
    ));
    svg.push_str(&format!(
        "<text x=\"12\" y=\"20\" font-size=\"14\" font-weight=\"bold\">{}</text>\n",
        escape(&opts.title)
    ));
    if !highlight.is_empty() {
        svg.push_str(
            "<text x=\"12\" y=\"36\" fill=\"#b03030\">highlighted = ground-truth cause</text>\n",
        );
    }

    for (row, &fi) in shown.iter().enumerate() {
        let rel = explanation.relevance[fi];
        let y = MARGIN_TOP + row as u32 * (opts.bar_height + GAP);
        let w = ((rel / max_rel) * bar_area as f64).round().max(1.0) as u32;
        let fill = if highlight.contains(&fi) {
            "#b03030"
        } else {
            "#4472a8"
        };
        let text_y = y + opts.bar_height / 2 + 4;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            LABEL_WIDTH,
            text_y,
            escape(&feature_names[fi])
        ));
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            LABEL_WIDTH + 8,
            y,
            w,
            opts.bar_height,
            fill
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{:.4}</text>\n",
            LABEL_WIDTH + 8 + w + 6,
            text_y,
            rel
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explanation::{rank_desc, ExplainMethod};

    fn sample_explanation() -> Explanation {
        let relevance = vec![0.1, 0.6, 0.3];
        let ranking = rank_desc(&relevance);
        Explanation {
            method: ExplainMethod::Rxp,
            relevance,
            ranking,
            zscores: None,
            elapsed_ns: None,
            shap: None,
        }
    }

    #[test]
    fn chart_contains_every_shown_feature_and_valid_markup() {
        let names = vec!["A".into(), "B&B".into(), "C".into()];
        let svg = relevance_chart(
            &sample_explanation(),
            &names,
            &[1],
            &ChartOptions::default(),
        )
        .unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("B&amp;B"));
        assert!(svg.contains("#b03030")); // highlighted cause
        assert_eq!(svg.matches("<rect").count(), 1 + 3); // background + bars
    }

    #[test]
    fn top_n_truncates_the_bars() {
        let names = vec!["A".into(), "B".into(), "C".into()];
        let opts = ChartOptions {
            top_n: 1,
            ..ChartOptions::default()
        };
        let svg = relevance_chart(&sample_explanation(), &names, &[], &opts).unwrap();
        assert_eq!(svg.matches("<rect").count(), 1 + 1);
        assert!(svg.contains(">B<")); // the top-ranked feature survives
        assert!(!svg.contains(">C<"));
    }

    #[test]
    fn name_count_mismatch_is_rejected() {
        let names = vec!["A".into()];
        assert!(matches!(
            relevance_chart(&sample_explanation(), &names, &[], &ChartOptions::default()),
            Err(Error::DimensionError(_))
        ));
    }
}
