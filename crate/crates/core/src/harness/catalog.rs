use crate::operators::battery_labels;
use crate::solver::MANUFACTURED;

use super::config::{ExperimentKind, KernelFamily};

const WEIGHT_FAMILIES: [(&str, &str); 4] = [
    ("constant", "c"),
    ("expression", "user expression in x1..xn, t, r"),
    ("power", "r^(beta - (n+2)/p)"),
    ("power-log", "r^(beta - (n+2)/p) log^m(e + r)"),
];

fn kernel_description(f: KernelFamily) -> &'static str {
    match f {
        KernelFamily::GaussianJet => "derivatives of the frozen Gaussian fundamental solution for coefficients a(x)",
        KernelFamily::Heat => "derivatives of the heat kernel (a = I)",
        KernelFamily::Majorant => "rho^-(n+2), no cancellation",
    }
}

/// Everything the configs can name, one sorted section per category.
pub fn list_catalog() -> String {
    let mut sections: Vec<(&str, Vec<(String, String)>)> = vec![
        (
            "battery presets",
            vec![("standard".to_string(), battery_labels(2).join(", "))],
        ),
        (
            "experiment kinds",
            ExperimentKind::ALL.iter().map(|k| (k.name().to_string(), String::new())).collect(),
        ),
        (
            "kernel families",
            KernelFamily::ALL
                .iter()
                .map(|f| (f.name().to_string(), kernel_description(*f).to_string()))
                .collect(),
        ),
        (
            "manufactured problems",
            MANUFACTURED.iter().map(|id| (id.to_string(), String::new())).collect(),
        ),
        (
            "weight families",
            WEIGHT_FAMILIES.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        ),
    ];
    sections.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = String::new();
    for (title, mut entries) in sections {
        entries.sort();
        out.push_str(title);
        out.push_str(":\n");
        for (name, desc) in entries {
            if desc.is_empty() {
                out.push_str(&format!("  {name}\n"));
            } else {
                out.push_str(&format!("  {name:<22} {desc}\n"));
            }
        }
    }
    out
}
