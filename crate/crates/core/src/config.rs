//! Simulation parameters and the flat `key = value` config format.
//!
//! Keys are case-sensitive and match the names written by [`SimConfig::to_text`].
//! Blank lines and `#` comments are ignored; any key not present keeps its
//! default.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of time steps a moving-dots stimulus spans (spike times `0..STIMULUS_STEPS`).
pub const STIMULUS_STEPS: usize = 5;

macro_rules! sim_config {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty = $default:expr, $key:literal; )*) => {
        /// Every tunable of the model, learning rules and experiment.
        #[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
        pub struct SimConfig {
            $( $(#[$doc])* #[serde(rename = $key)] pub $field: $ty, )*
        }

        impl Default for SimConfig {
            fn default() -> Self {
                SimConfig { $( $field: $default, )* }
            }
        }

        impl SimConfig {
            /// All recognised keys, in file order.
            pub const KEYS: &'static [&'static str] = &[$( $key ),*];

            fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
                match key {
                    $( $key => self.$field = parse_value::<$ty>(key, value, line)?, )*
                    other => return Err(Error::parse(line, format!("unknown key `{other}`"))),
                }
                Ok(())
            }

            /// Serialize to the flat text format; every key is written.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $( let _ = writeln!(out, "{} = {}", $key, self.$field); )*
                out
            }
        }
    };
}

sim_config! {
    /// Firing threshold at rest.
    threshold: f64 = 4.15, "threshold";
    /// Membrane time constant.
    tau_m: f64 = 20.0, "tau_m";
    a_plus: f64 = 5.0, "A_plus";
    a_minus: f64 = 5.0, "A_minus";
    tau_plus: f64 = 0.0001, "tau_plus";
    tau_minus: f64 = 0.0001, "tau_minus";
    weight_init_mean: f64 = 0.95, "weight_init_mean";
    weight_init_std: f64 = 0.05, "weight_init_std";
    b_plus: f64 = 5.0, "B_plus";
    b_minus: f64 = 5.0, "B_minus";
    sigma_plus: f64 = 0.001, "sigma_plus";
    sigma_minus: f64 = 0.001, "sigma_minus";
    delay_init_mean: f64 = 50.0, "delay_init_mean";
    /// Standard deviation of the initial delay distribution.
    delay_init_spread: f64 = 0.02, "delay_init_spread";
    /// Delay learning of a feature stops once any of its delays drops below this.
    freeze_c: f64 = 0.001, "freeze_c";
    /// Added to every unfrozen delay per elapsed time unit.
    growth_factor: f64 = 0.0001, "growth_factor";
    lambda_w: f64 = 0.01, "lambda_w";
    lambda_d: f64 = 0.1, "lambda_d";
    /// Target firings per stimulus for one feature map.
    r_target: f64 = 1.0, "r_target";
    /// Decay of the moving average of observed per-stimulus firings.
    rate_ema_decay: f64 = 0.9, "rate_ema_decay";
    /// Std of the Gaussian noise added to the membrane each integration step.
    noise_std: f64 = 0.05, "noise_std";
    /// Membrane integration step.
    dt: f64 = 0.1, "dt";
    stimulus_window: f64 = 60.0, "stimulus_window";
    grid_height: usize = 15, "grid_height";
    grid_width: usize = 15, "grid_width";
    w_min: f64 = 0.0, "w_min";
    w_max: f64 = 1.0, "w_max";
    /// Lower bound for any delay after an update. Kept below `freeze_c`, so
    /// a delay driven to the floor always trips the stop condition.
    delay_min: f64 = 0.0005, "delay_min";
    threshold_adapt_up: f64 = 0.05, "threshold_adapt_up";
    threshold_adapt_down: f64 = 0.001, "threshold_adapt_down";
    threshold_min: f64 = 1.0, "threshold_min";
    /// Reject configs where `freeze_c <= B_minus`.
    strict_freeze: bool = false, "strict_freeze";
    rng_seed: u64 = 42, "rng_seed";
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::parse(line, format!("cannot parse `{value}` for key `{key}`")))
}

impl SimConfig {
    /// Parse config text, apply defaults for missing keys and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::parse(line, "empty key or value"));
            }
            cfg.set(key, value, line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its text form, as the config file would. Used for
    /// command-line overrides.
    pub fn override_value(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(key, value, 0)?;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("threshold", self.threshold),
            ("tau_m", self.tau_m),
            ("tau_plus", self.tau_plus),
            ("tau_minus", self.tau_minus),
            ("sigma_plus", self.sigma_plus),
            ("sigma_minus", self.sigma_minus),
            ("B_minus", self.b_minus),
            ("freeze_c", self.freeze_c),
            ("dt", self.dt),
            ("stimulus_window", self.stimulus_window),
            ("r_target", self.r_target),
            ("delay_init_mean", self.delay_init_mean),
            ("delay_min", self.delay_min),
            ("threshold_min", self.threshold_min),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(field, format!("must be finite and > 0, got {value}")));
            }
        }
        let non_negative = [
            ("A_plus", self.a_plus),
            ("A_minus", self.a_minus),
            ("B_plus", self.b_plus),
            ("weight_init_std", self.weight_init_std),
            ("delay_init_spread", self.delay_init_spread),
            ("growth_factor", self.growth_factor),
            ("lambda_w", self.lambda_w),
            ("lambda_d", self.lambda_d),
            ("noise_std", self.noise_std),
            ("threshold_adapt_up", self.threshold_adapt_up),
            ("threshold_adapt_down", self.threshold_adapt_down),
            ("w_min", self.w_min),
        ];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::validation(field, format!("must be finite and >= 0, got {value}")));
            }
        }
        if !self.weight_init_mean.is_finite() {
            return Err(Error::validation("weight_init_mean", "must be finite"));
        }
        if !(self.w_max.is_finite() && self.w_max > self.w_min) {
            return Err(Error::validation("w_max", "must be finite and greater than w_min"));
        }
        if !(0.0..1.0).contains(&self.rate_ema_decay) {
            return Err(Error::validation("rate_ema_decay", "must lie in [0, 1)"));
        }
        if self.grid_height < crate::types::KERNEL {
            return Err(Error::validation("grid_height", "grid must be at least as large as the 5x5 kernel"));
        }
        if self.grid_width < crate::types::KERNEL {
            return Err(Error::validation("grid_width", "grid must be at least as large as the 5x5 kernel"));
        }
        let latest_arrival =
            self.delay_init_mean + 6.0 * self.delay_init_spread + (STIMULUS_STEPS - 1) as f64;
        if self.stimulus_window < latest_arrival {
            return Err(Error::validation(
                "stimulus_window",
                format!("must cover the initial delays plus the last input spike ({latest_arrival})"),
            ));
        }
        if self.strict_freeze && self.freeze_c <= self.b_minus {
            return Err(Error::validation(
                "freeze_c",
                format!("strict mode requires freeze_c > B_minus ({} <= {})", self.freeze_c, self.b_minus),
            ));
        }
        Ok(())
    }
}

/// Read and validate a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SimConfig::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_table_defaults() {
        let cfg = SimConfig::parse("").unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!(cfg.threshold, 4.15);
        assert_eq!(cfg.tau_m, 20.0);
        assert_eq!(cfg.a_plus, 5.0);
        assert_eq!(cfg.a_minus, 5.0);
        assert_eq!(cfg.tau_plus, 0.0001);
        assert_eq!(cfg.tau_minus, 0.0001);
        assert_eq!(cfg.weight_init_mean, 0.95);
        assert_eq!(cfg.weight_init_std, 0.05);
        assert_eq!(cfg.b_plus, 5.0);
        assert_eq!(cfg.b_minus, 5.0);
        assert_eq!(cfg.sigma_plus, 0.001);
        assert_eq!(cfg.sigma_minus, 0.001);
        assert_eq!(cfg.delay_init_mean, 50.0);
        assert_eq!(cfg.delay_init_spread, 0.02);
        assert_eq!(cfg.freeze_c, 0.001);
        assert_eq!(cfg.growth_factor, 0.0001);
    }

    #[test]
    fn zero_b_minus_is_rejected() {
        let err = SimConfig::parse("B_minus = 0\n").unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "B_minus"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn override_keeps_other_defaults() {
        let cfg = SimConfig::parse("# bigger grid\ngrid_height = 15 # trailing\n").unwrap();
        assert_eq!(cfg.grid_height, 15);
        let cfg = SimConfig::parse("grid_height=21").unwrap();
        assert_eq!(
            cfg,
            SimConfig {
                grid_height: 21,
                ..SimConfig::default()
            }
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = SimConfig::parse("threshold = 4\n\nnot a pair\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = SimConfig::parse("tau_m = fast").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = SimConfig::parse("Threshold = 4").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "keys are case-sensitive");
    }

    #[test]
    fn invalid_values_name_the_field() {
        for (text, field) in [
            ("freeze_c = 0", "freeze_c"),
            ("freeze_c = -1", "freeze_c"),
            ("dt = 0", "dt"),
            ("tau_m = -3", "tau_m"),
            ("grid_width = 4", "grid_width"),
            ("stimulus_window = 40", "stimulus_window"),
            ("w_max = 0", "w_max"),
        ] {
            match SimConfig::parse(text) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: expected validation error, got {other:?}"),
            }
        }
    }

    #[test]
    fn strict_freeze_enforces_c_above_b_minus() {
        assert!(SimConfig::parse("strict_freeze = true").is_err());
        let cfg = SimConfig::parse("strict_freeze = true\nfreeze_c = 6\n").unwrap();
        assert!(cfg.strict_freeze);
    }

    #[test]
    fn text_round_trip() {
        let cfg = SimConfig {
            noise_std: 0.1 + 0.2,
            grid_width: 17,
            rng_seed: u64::MAX,
            strict_freeze: true,
            freeze_c: 7.25,
            ..SimConfig::default()
        };
        let back = SimConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
        assert_eq!(cfg.to_text().lines().count(), SimConfig::KEYS.len());
    }
}
