use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Built-in configs, one per reproduced figure.
pub const FIGURES: [(&str, &str); 8] = [
    ("rate-discrete", include_str!("../../configs/rate-discrete.toml")),
    ("rate-dist", include_str!("../../configs/rate-dist.toml")),
    ("compare-stream", include_str!("../../configs/compare-stream.toml")),
    ("rate-relstream", include_str!("../../configs/rate-relstream.toml")),
    ("rate-dis-recursive", include_str!("../../configs/rate-dis-recursive.toml")),
    ("rate-dis-com-rcr", include_str!("../../configs/rate-dis-com-rcr.toml")),
    ("rate-sample", include_str!("../../configs/rate-sample.toml")),
    ("rd-bounds", include_str!("../../configs/rd-bounds.toml")),
];

pub fn figure_names() -> impl Iterator<Item = &'static str> {
    FIGURES.iter().map(|(n, _)| *n)
}

/// TOML text of a built-in figure config.
pub fn figure_text(name: &str) -> Result<&'static str> {
    FIGURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let known: Vec<&str> = figure_names().collect();
            Error::Config(format!("unknown figure `{name}`; known: {}", known.join(", ")))
        })
}

pub fn figure_config(name: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(figure_text(name)?)
}
