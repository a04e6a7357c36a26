//! Flat `key = value` run configuration.
//!
//! Every knob of the plant, controllers, data collection, and scenarios
//! lives here; [`RunConfig::default`] carries the reference parameter set
//! used throughout the experiments. Files round-trip exactly:
//! `parse(to_text(cfg)) == cfg`.

use crate::beam::BeamModel;
use crate::deepc::DeePCConfig;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // Plant.
    pub ei: f64,
    pub rho: f64,
    pub length: f64,
    pub hub_inertia: f64,
    pub n_elements: usize,
    pub dt: f64,
    pub rho_inf: f64,

    // Predictive controller.
    pub t_ini: usize,
    pub horizon: usize,
    pub q_weight: f64,
    pub r_weight: f64,
    pub lambda_g: f64,
    pub lambda_y: f64,

    // Boundary-feedback controller.
    pub a1: f64,
    pub a2: f64,
    pub k1: f64,
    pub k2: f64,
    pub delta: f64,
    pub eta: f64,

    // Data collection.
    pub kp: f64,
    pub kd: f64,
    pub dither: f64,
    pub collect_duration: f64,
    pub dwell: f64,
    pub collect_refs: Vec<f64>,
    pub n_est: usize,

    // Scenarios.
    pub theta_d: f64,
    pub duration: f64,
    pub settle_band: f64,
    pub noise_std: f64,
    pub rho_multiplier: f64,
    pub impulse: f64,
    pub impulse_duration: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ei: 120.0,
            rho: 20.0,
            length: 5.0,
            hub_inertia: 400.0,
            n_elements: 20,
            dt: 0.05,
            rho_inf: 0.9,
            t_ini: 20,
            horizon: 20,
            q_weight: 1000.0,
            r_weight: 2.5e-4,
            lambda_g: 1000.0,
            lambda_y: 3e5,
            a1: 0.0428,
            a2: 3000.0,
            k1: 0.1,
            k2: 2.1e-10,
            delta: 0.0098,
            eta: 1.0,
            kp: 50.0,
            kd: 100.0,
            dither: 2.0,
            collect_duration: 200.0,
            dwell: 50.0,
            collect_refs: vec![0.0, 0.05, 0.1, -0.05],
            n_est: 82,
            theta_d: 0.1,
            duration: 200.0,
            settle_band: 0.02,
            noise_std: 0.5,
            rho_multiplier: 2.0,
            impulse: 5.0,
            impulse_duration: 1.0,
            seed: 42,
        }
    }
}

macro_rules! config_keys {
    ($($key:ident : $kind:ident),* $(,)?) => {
        const KEYS: &[&str] = &[$(stringify!($key)),*];

        impl RunConfig {
            /// Render as flat `key = value` text.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(
                    out.push_str(&format!(
                        "{} = {}\n",
                        stringify!($key),
                        render_value!(self, $key, $kind)
                    ));
                )*
                out
            }

            fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
                match key {
                    $(stringify!($key) => {
                        self.$key = parse_value!(value, $kind, key, line)?;
                        Ok(())
                    })*
                    _ => Err(Error::Config {
                        line: Some(line),
                        message: format!("unknown key '{key}'"),
                    }),
                }
            }
        }
    };
}

macro_rules! render_value {
    ($self:ident, $key:ident, float) => {
        $self.$key
    };
    ($self:ident, $key:ident, int) => {
        $self.$key
    };
    ($self:ident, $key:ident, list) => {
        $self
            .$key
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
}

macro_rules! parse_value {
    ($value:expr, float, $key:expr, $line:expr) => {
        $value.parse::<f64>().map_err(|_| Error::Config {
            line: Some($line),
            message: format!("key '{}': not a number: '{}'", $key, $value),
        })
    };
    ($value:expr, int, $key:expr, $line:expr) => {
        $value.parse().map_err(|_| Error::Config {
            line: Some($line),
            message: format!("key '{}': not an integer: '{}'", $key, $value),
        })
    };
    ($value:expr, list, $key:expr, $line:expr) => {
        $value
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| Error::Config {
                    line: Some($line),
                    message: format!("key '{}': not a number: '{}'", $key, v),
                })
            })
            .collect::<Result<Vec<f64>>>()
    };
}

config_keys! {
    ei: float,
    rho: float,
    length: float,
    hub_inertia: float,
    n_elements: int,
    dt: float,
    rho_inf: float,
    t_ini: int,
    horizon: int,
    q_weight: float,
    r_weight: float,
    lambda_g: float,
    lambda_y: float,
    a1: float,
    a2: float,
    k1: float,
    k2: float,
    delta: float,
    eta: float,
    kp: float,
    kd: float,
    dither: float,
    collect_duration: float,
    dwell: float,
    collect_refs: list,
    n_est: int,
    theta_d: float,
    duration: float,
    settle_band: float,
    noise_std: float,
    rho_multiplier: float,
    impulse: float,
    impulse_duration: float,
    seed: int,
}

impl RunConfig {
    /// Parse flat `key = value` text; `#` starts a comment. Unknown or
    /// duplicate keys are errors that name the key and line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: Some(line_no),
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if let Some(known) = KEYS.iter().find(|k| **k == key) {
                if seen.contains(known) {
                    return Err(Error::Config {
                        line: Some(line_no),
                        message: format!("duplicate key '{key}'"),
                    });
                }
                seen.push(known);
            }
            cfg.set(key, value, line_no)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn beam_model(&self) -> Result<BeamModel> {
        BeamModel::new(
            self.ei,
            self.rho,
            self.length,
            self.hub_inertia,
            self.n_elements,
            self.dt,
        )
    }

    pub fn deepc_config(&self) -> DeePCConfig {
        DeePCConfig {
            t_ini: self.t_ini,
            horizon: self.horizon,
            q_weight: self.q_weight,
            r_weight: self.r_weight,
            lambda_g: self.lambda_g,
            lambda_y: Some(self.lambda_y),
            input_bounds: None,
            output_bounds: None,
            reference: self.theta_d,
        }
    }

    /// Boundary-feedback gains: the four primary gains from the config with
    /// a₃, a₄ completed through the coupling equalities.
    pub fn lyapunov_params(&self) -> Result<LyapunovParams> {
        LyapunovParams::from_gains(
            self.a1,
            self.a2,
            self.k1,
            self.k2,
            self.delta,
            self.eta,
            &self.beam_model()?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_the_reference_parameters() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.ei, 120.0);
        assert_eq!(cfg.hub_inertia, 400.0);
        assert_eq!(cfg.rho, 20.0);
        assert_eq!(cfg.length, 5.0);
        assert_eq!(cfg.dt, 0.05);
        assert_eq!(cfg.beam_model().unwrap().element_length(), 0.25);
        assert_eq!(cfg.t_ini, 20);
        assert_eq!(cfg.horizon, 20);
        assert_eq!(cfg.q_weight, 1000.0);
        assert_eq!(cfg.r_weight, 2.5e-4);
        assert_eq!(cfg.lambda_g, 1000.0);
        assert_eq!(cfg.lambda_y, 3e5);
        assert_eq!(cfg.a1, 0.0428);
        assert_eq!(cfg.a2, 3000.0);
        assert_eq!(cfg.k1, 0.1);
        assert_eq!(cfg.k2, 2.1e-10);
    }

    #[test]
    fn text_round_trip_preserves_every_field() {
        let mut cfg = RunConfig::default();
        cfg.q_weight = 123.456789012345;
        cfg.seed = 987654321;
        cfg.collect_refs = vec![0.1, -0.25, 3e-7];
        let parsed = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn unknown_key_is_an_error_naming_the_key() {
        let err = RunConfig::parse("ei = 120\nbogus_key = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = RunConfig::parse("ei = 120\nnot a pair\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let err = RunConfig::parse("ei = twelve\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = RunConfig::parse("ei = 120\nei = 130\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = RunConfig::parse("# plant\n\nei = 60 # halved\n").unwrap();
        assert_eq!(cfg.ei, 60.0);
        assert_eq!(cfg.rho, 20.0);
    }
}
