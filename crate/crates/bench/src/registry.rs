//! Estimator names accepted per scenario.

pub const LINEAR: &[&str] = &[
    "kf-wpv",
    "ks-wpv",
    "kf-wpa",
    "ks-wpa",
    "imm",
    "imm-smoother",
    "imm-forecast",
    "o2",
    "fit-online",
    "fit-delayed",
    "fit-smoothed",
    "fit-forecast",
    "oracle",
];

pub const BEARINGS: &[&str] = &[
    "ekf",
    "eks",
    "ukf",
    "uks",
    "ekf-imm",
    "ekf-imm-smoother",
    "ekf-imm-forecast",
    "ukf-imm",
    "ukf-imm-smoother",
    "ukf-imm-forecast",
    "fit-online",
    "fit-delayed",
    "fit-smoothed",
    "fit-forecast",
    "oracle",
];

pub const BALLISTIC: &[&str] =
    &["ekf", "ukf", "pf", "o2-biased", "o2-unbiased", "fit-online", "fit-velocity", "oracle"];

pub fn available(scenario: u8) -> &'static [&'static str] {
    match scenario {
        1 => LINEAR,
        2 => BEARINGS,
        3 => BALLISTIC,
        _ => &[],
    }
}

/// Default estimator list: everything except the truth oracle.
pub fn defaults(scenario: u8) -> Vec<String> {
    available(scenario).iter().filter(|n| **n != "oracle").map(|n| n.to_string()).collect()
}
