//! Scenario configuration, presets and the flat key-value config file.
//!
//! Config files hold one `key = value` pair per line; `#` starts a comment.
//! Keys not present keep the `quadriga-like` preset value. All quantities
//! are SI (Hz, meters).
//!
//! | key | meaning |
//! |-----|---------|
//! | `center_frequency_hz` | carrier frequency `f_c` |
//! | `bandwidth_hz` | total band `B` spanned by the subcarriers |
//! | `subcarriers` | subcarrier count `S` |
//! | `array` | `ula` or `upa` |
//! | `antennas` | ULA element count |
//! | `antennas_horizontal`, `antennas_vertical` | UPA element counts |
//! | `element_spacing` | element spacing in wavelengths |
//! | `broadside` | array broadside direction `x,y,z` |
//! | `users` | user count `N` |
//! | `area_x_min`, `area_x_max`, `area_y_min`, `area_y_max` | user area, base station at the origin |
//! | `user_height` | z coordinate of users and scatterers |
//! | `paths_per_user` | paths per user `P` (LoS included) |
//! | `los_probability` | probability that a user has a line-of-sight path |
//! | `scatterers` | number of shared point scatterers |
//! | `snr_db` | dataset-average SNR in dB, or `none` for noiseless |
//! | `snapshots` | noisy snapshots averaged per channel `T` |
//! | `seed` | RNG seed |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrayKind {
    Ula { count: usize },
    Upa { horizontal: usize, vertical: usize },
}

/// Base-station array layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    /// Broadside direction; must have a nonzero horizontal component.
    pub broadside: [f64; 3],
}

impl ArrayGeometry {
    pub fn ula(count: usize) -> Self {
        Self {
            kind: ArrayKind::Ula { count },
            element_spacing: 0.5,
            broadside: [0.0, 1.0, 0.0],
        }
    }

    pub fn upa(horizontal: usize, vertical: usize) -> Self {
        Self {
            kind: ArrayKind::Upa {
                horizontal,
                vertical,
            },
            element_spacing: 0.5,
            broadside: [0.0, 1.0, 0.0],
        }
    }

    pub fn antenna_count(&self) -> usize {
        match self.kind {
            ArrayKind::Ula { count } => count,
            ArrayKind::Upa {
                horizontal,
                vertical,
            } => horizontal * vertical,
        }
    }

    /// Horizontal array axis (broadside turned by +90 degrees about z) and
    /// the vertical axis `z`.
    pub fn axes(&self) -> Result<([f64; 3], [f64; 3])> {
        let [bx, by, _] = self.broadside;
        let h = bx.hypot(by);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain(
                "array broadside needs a nonzero horizontal component".into(),
            ));
        }
        Ok(([-by / h, bx / h, 0.0], [0.0, 0.0, 1.0]))
    }

    pub fn validate(&self) -> Result<()> {
        let counts_ok = match self.kind {
            ArrayKind::Ula { count } => count >= 1,
            ArrayKind::Upa {
                horizontal,
                vertical,
            } => horizontal >= 1 && vertical >= 1,
        };
        if !counts_ok {
            return Err(Error::Domain("array element counts must be at least 1".into()));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(Error::Domain("element spacing must be positive".into()));
        }
        self.axes().map(|_| ())
    }
}

/// Axis-aligned rectangle holding the users; the base station sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Full parameterization of the synthetic channel generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub subcarrier_count: usize,
    pub geometry: ArrayGeometry,
    pub user_count: usize,
    pub area: Area,
    pub user_height: f64,
    pub paths_per_user: usize,
    pub los_probability: f64,
    pub scatterer_count: usize,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub snapshot_count: usize,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        preset_quadriga_like()
    }
}

/// 2048 users in a 1000 m x 500 m area, 32-element ULA, one subcarrier at
/// 2 GHz, 0 dB SNR averaged over 10 snapshots.
pub fn preset_quadriga_like() -> ScenarioConfig {
    ScenarioConfig {
        center_frequency: 2e9,
        bandwidth: 20e6,
        subcarrier_count: 1,
        geometry: ArrayGeometry::ula(32),
        user_count: 2048,
        area: Area {
            x_min: -500.0,
            x_max: 500.0,
            y_min: 0.0,
            y_max: 500.0,
        },
        user_height: 0.0,
        paths_per_user: 3,
        los_probability: 1.0,
        scatterer_count: 25,
        snr_db: Some(0.0),
        snapshot_count: 10,
        rng_seed: 1,
    }
}

/// 3000 users, 8x8 UPA, 16 subcarriers over 20 MHz at 3.5 GHz, 5 paths,
/// noiseless single snapshot.
pub fn preset_deepmimo_like() -> ScenarioConfig {
    ScenarioConfig {
        center_frequency: 3.5e9,
        bandwidth: 20e6,
        subcarrier_count: 16,
        geometry: ArrayGeometry::upa(8, 8),
        user_count: 3000,
        area: Area {
            x_min: -200.0,
            x_max: 200.0,
            y_min: 20.0,
            y_max: 320.0,
        },
        user_height: -10.0,
        paths_per_user: 5,
        los_probability: 0.8,
        scatterer_count: 40,
        snr_db: None,
        snapshot_count: 1,
        rng_seed: 1,
    }
}

impl ScenarioConfig {
    pub fn wavelength(&self) -> f64 {
        super::SPEED_OF_LIGHT / self.center_frequency
    }

    pub fn antenna_count(&self) -> usize {
        self.geometry.antenna_count()
    }

    /// Channel dimension `M = A * S`.
    pub fn channel_dim(&self) -> usize {
        self.antenna_count() * self.subcarrier_count
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Domain(m.to_string()));
        if !(self.center_frequency > 0.0 && self.center_frequency.is_finite()) {
            return fail("center frequency must be positive");
        }
        if !(self.bandwidth >= 0.0 && self.bandwidth < self.center_frequency) {
            return fail("bandwidth must satisfy 0 <= B < f_c");
        }
        if self.subcarrier_count < 1 {
            return fail("need at least one subcarrier");
        }
        if self.subcarrier_count > 1 && self.bandwidth <= 0.0 {
            return fail("several subcarriers need a positive bandwidth");
        }
        self.geometry.validate()?;
        if self.user_count < 2 {
            return fail("need at least two users");
        }
        let a = &self.area;
        if !(a.x_min < a.x_max && a.y_min < a.y_max) || !self.user_height.is_finite() {
            return fail("area must be a nonempty finite rectangle");
        }
        if self.paths_per_user < 1 {
            return fail("need at least one path per user");
        }
        if !(0.0..=1.0).contains(&self.los_probability) {
            return fail("LoS probability must lie in [0, 1]");
        }
        let needed = if self.los_probability >= 1.0 {
            self.paths_per_user - 1
        } else {
            self.paths_per_user
        };
        if self.scatterer_count < needed {
            return Err(Error::Domain(format!(
                "{} scatterers cannot supply {needed} scattered paths per user",
                self.scatterer_count
            )));
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return fail("SNR must be finite (or none)");
        }
        if self.snapshot_count < 1 {
            return fail("need at least one snapshot");
        }
        Ok(())
    }

    /// Parses a key-value config file on top of the `quadriga-like` preset.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: &str| Error::Config {
                line,
                text: raw.trim().to_string(),
                message: message.to_string(),
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`"))?;
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(err("unknown key"));
            }
            if entries
                .insert(key, (line, raw.trim().to_string(), value.trim().to_string()))
                .is_some()
            {
                return Err(err("duplicate key"));
            }
        }

        let mut cfg = preset_quadriga_like();
        let get = |key: &str| entries.get(key);
        fn parse<T: std::str::FromStr>(entry: &(usize, String, String)) -> Result<T> {
            entry.2.parse::<T>().map_err(|_| Error::Config {
                line: entry.0,
                text: entry.1.clone(),
                message: "invalid value".into(),
            })
        }
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(e) = get($key) {
                    $field = parse(e)?;
                }
            };
        }
        set!("center_frequency_hz", cfg.center_frequency);
        set!("bandwidth_hz", cfg.bandwidth);
        set!("subcarriers", cfg.subcarrier_count);
        set!("element_spacing", cfg.geometry.element_spacing);
        set!("users", cfg.user_count);
        set!("area_x_min", cfg.area.x_min);
        set!("area_x_max", cfg.area.x_max);
        set!("area_y_min", cfg.area.y_min);
        set!("area_y_max", cfg.area.y_max);
        set!("user_height", cfg.user_height);
        set!("paths_per_user", cfg.paths_per_user);
        set!("los_probability", cfg.los_probability);
        set!("scatterers", cfg.scatterer_count);
        set!("snapshots", cfg.snapshot_count);
        set!("seed", cfg.rng_seed);

        let array = match get("array") {
            Some(e) => e.2.clone(),
            None => match cfg.geometry.kind {
                ArrayKind::Ula { .. } => "ula".into(),
                ArrayKind::Upa { .. } => "upa".into(),
            },
        };
        let ula_keys = get("antennas");
        let upa_keys = [get("antennas_horizontal"), get("antennas_vertical")];
        cfg.geometry.kind = match array.as_str() {
            "ula" => {
                if let Some(e) = upa_keys.iter().flatten().next() {
                    return Err(Error::Config {
                        line: e.0,
                        text: e.1.clone(),
                        message: "UPA key used with array = ula".into(),
                    });
                }
                let count = match ula_keys {
                    Some(e) => parse(e)?,
                    None => cfg.geometry.antenna_count(),
                };
                ArrayKind::Ula { count }
            }
            "upa" => {
                if let Some(e) = ula_keys {
                    return Err(Error::Config {
                        line: e.0,
                        text: e.1.clone(),
                        message: "`antennas` is for ULAs; use antennas_horizontal/antennas_vertical"
                            .into(),
                    });
                }
                let (h, v) = match upa_keys {
                    [Some(h), Some(v)] => (parse(h)?, parse(v)?),
                    _ => {
                        return Err(Error::Config {
                            line: get("array").map_or(0, |e| e.0),
                            text: "array = upa".into(),
                            message: "UPA needs antennas_horizontal and antennas_vertical".into(),
                        })
                    }
                };
                ArrayKind::Upa {
                    horizontal: h,
                    vertical: v,
                }
            }
            _ => {
                let e = get("array").expect("array key present when value is unknown");
                return Err(Error::Config {
                    line: e.0,
                    text: e.1.clone(),
                    message: "array must be `ula` or `upa`".into(),
                });
            }
        };
        if let Some(e) = get("broadside") {
            let parts: Vec<f64> = e
                .2
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .ok()
                .filter(|v: &Vec<f64>| v.len() == 3)
                .ok_or_else(|| Error::Config {
                    line: e.0,
                    text: e.1.clone(),
                    message: "broadside must be `x,y,z`".into(),
                })?;
            cfg.geometry.broadside = [parts[0], parts[1], parts[2]];
        }
        if let Some(e) = get("snr_db") {
            cfg.snr_db = if e.2.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(parse(e)?)
            };
        }
        cfg.validate().map_err(|err| {
            let message = err.to_string();
            Error::Config {
                line: 0,
                text: String::new(),
                message,
            }
        })?;
        Ok(cfg)
    }

    /// Serializes every key; `from_kv_str(to_kv_string())` reproduces `self`.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("center_frequency_hz", format!("{:?}", self.center_frequency));
        kv("bandwidth_hz", format!("{:?}", self.bandwidth));
        kv("subcarriers", self.subcarrier_count.to_string());
        match self.geometry.kind {
            ArrayKind::Ula { count } => {
                kv("array", "ula".into());
                kv("antennas", count.to_string());
            }
            ArrayKind::Upa {
                horizontal,
                vertical,
            } => {
                kv("array", "upa".into());
                kv("antennas_horizontal", horizontal.to_string());
                kv("antennas_vertical", vertical.to_string());
            }
        }
        kv("element_spacing", format!("{:?}", self.geometry.element_spacing));
        let [bx, by, bz] = self.geometry.broadside;
        kv("broadside", format!("{bx:?},{by:?},{bz:?}"));
        kv("users", self.user_count.to_string());
        kv("area_x_min", format!("{:?}", self.area.x_min));
        kv("area_x_max", format!("{:?}", self.area.x_max));
        kv("area_y_min", format!("{:?}", self.area.y_min));
        kv("area_y_max", format!("{:?}", self.area.y_max));
        kv("user_height", format!("{:?}", self.user_height));
        kv("paths_per_user", self.paths_per_user.to_string());
        kv("los_probability", format!("{:?}", self.los_probability));
        kv("scatterers", self.scatterer_count.to_string());
        kv(
            "snr_db",
            self.snr_db.map_or("none".into(), |v| format!("{v:?}")),
        );
        kv("snapshots", self.snapshot_count.to_string());
        kv("seed", self.rng_seed.to_string());
        s
    }
}

const KEYS: &[&str] = &[
    "center_frequency_hz",
    "bandwidth_hz",
    "subcarriers",
    "array",
    "antennas",
    "antennas_horizontal",
    "antennas_vertical",
    "element_spacing",
    "broadside",
    "users",
    "area_x_min",
    "area_x_max",
    "area_y_min",
    "area_y_max",
    "user_height",
    "paths_per_user",
    "los_probability",
    "scatterers",
    "snr_db",
    "snapshots",
    "seed",
];
