//! Every tunable in one place, with a flat `key = value` view for config
//! files and command-line overrides.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::features::{DetectConfig, DictionaryConfig, MaximaConfig, ScaleScan};
use crate::identify::{DetectParams, LocalizeParams, VoteParams};
use crate::index::{MatchMode, MatchParams};
use crate::{ChromaParams, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub fs: u32,
    pub window_s: f64,
    pub overlap: f64,
    pub m: u32,
    pub n: u32,
    pub f0: f64,

    pub c: usize,
    pub w_t: f64,
    pub w_p: usize,
    pub seed: u64,
    pub s_min: f64,
    pub s_max: f64,
    pub num_scales: usize,
    pub q: usize,
    pub r: usize,
    /// 0 keeps every local maximum.
    pub max_per_second: usize,
    pub noise_floor: f64,

    pub alpha: f64,
    pub theta_max: f64,
    pub match_mode: MatchMode,

    pub delta: f64,
    pub r_frac: f64,
    pub vote_hop: f64,
    pub min_window_matches: usize,

    pub a_bin_octaves: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub b_bin_s: f64,
    pub sigma_bins: f64,
    pub delta_a_rel: f64,
    pub delta_b: f64,
    pub min_support: usize,
}

impl Default for Config {
    fn default() -> Self {
        let chroma = ChromaParams::default();
        let dict = DictionaryConfig::default();
        let scan = ScaleScan::default();
        let maxima = MaximaConfig::default();
        let matching = MatchParams::default();
        let vote = VoteParams::default();
        let loc = LocalizeParams::default();
        Config {
            fs: chroma.fs,
            window_s: 0.1,
            overlap: 0.75,
            m: chroma.m,
            n: chroma.n,
            f0: chroma.f0,
            c: dict.c,
            w_t: dict.w_t_s,
            w_p: dict.w_p,
            seed: dict.seed,
            s_min: scan.s_min,
            s_max: scan.s_max,
            num_scales: scan.num_scales,
            q: dict.q,
            r: dict.r,
            max_per_second: maxima.max_per_second.unwrap_or(0),
            noise_floor: maxima.noise_floor_ratio,
            alpha: matching.alpha,
            theta_max: matching.theta_max,
            match_mode: matching.mode,
            delta: vote.delta,
            r_frac: vote.r_frac,
            vote_hop: vote.hop,
            min_window_matches: vote.min_matches,
            a_bin_octaves: loc.a_bin_octaves,
            a_min: loc.a_min,
            a_max: loc.a_max,
            b_bin_s: loc.b_bin_s,
            sigma_bins: loc.sigma_bins,
            delta_a_rel: loc.delta_a_rel,
            delta_b: loc.delta_b,
            min_support: loc.min_support,
        }
    }
}

/// Keys accepted by [`Config::set`], in dump order.
pub const KEYS: &[&str] = &[
    "fs",
    "window_s",
    "overlap",
    "m",
    "n",
    "f0",
    "c",
    "w_t",
    "w_p",
    "seed",
    "s_min",
    "s_max",
    "num_scales",
    "q",
    "r",
    "max_per_second",
    "noise_floor",
    "alpha",
    "theta_max",
    "match_mode",
    "delta",
    "r_frac",
    "vote_hop",
    "min_window_matches",
    "a_bin_octaves",
    "a_min",
    "a_max",
    "b_bin_s",
    "sigma_bins",
    "delta_a_rel",
    "delta_b",
    "min_support",
];

/// Errors from [`Config::set`] carry the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyError {
    Unknown(String),
    BadValue { key: String, value: String },
}

impl core::fmt::Display for KeyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KeyError::Unknown(k) => write!(f, "unknown config key `{k}`"),
            KeyError::BadValue { key, value } => write!(f, "bad value `{value}` for config key `{key}`"),
        }
    }
}

impl core::error::Error for KeyError {}

fn parse<T: core::str::FromStr>(key: &str, value: &str) -> core::result::Result<T, KeyError> {
    value.parse().map_err(|_| KeyError::BadValue { key: key.to_string(), value: value.to_string() })
}

impl Config {
    pub fn chroma(&self) -> ChromaParams {
        ChromaParams { m: self.m, n: self.n, f0: self.f0, fs: self.fs }
    }

    pub fn maxima(&self) -> MaximaConfig {
        MaximaConfig {
            max_per_second: (self.max_per_second > 0).then_some(self.max_per_second),
            noise_floor_ratio: self.noise_floor,
        }
    }

    pub fn dictionary(&self) -> DictionaryConfig {
        DictionaryConfig {
            c: self.c,
            w_t_s: self.w_t,
            w_p: self.w_p,
            q: self.q,
            r: self.r,
            seed: self.seed,
            maxima: self.maxima(),
        }
    }

    pub fn detect_features(&self) -> DetectConfig {
        DetectConfig {
            scan: ScaleScan { s_min: self.s_min, s_max: self.s_max, num_scales: self.num_scales },
            maxima: self.maxima(),
        }
    }

    pub fn detect(&self) -> DetectParams {
        DetectParams {
            matching: MatchParams { alpha: self.alpha, theta_max: self.theta_max, mode: self.match_mode },
            vote: VoteParams {
                delta: self.delta,
                r_frac: self.r_frac,
                hop: self.vote_hop,
                min_matches: self.min_window_matches,
            },
            localize: LocalizeParams {
                a_bin_octaves: self.a_bin_octaves,
                a_min: self.a_min,
                a_max: self.a_max,
                b_bin_s: self.b_bin_s,
                sigma_bins: self.sigma_bins,
                delta_a_rel: self.delta_a_rel,
                delta_b: self.delta_b,
                min_support: self.min_support,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chroma().validate()?;
        self.detect_features().scan.validate()?;
        if !(self.window_s > 0.0) || !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidParameter("window_s must be positive and overlap in [0, 1)"));
        }
        if self.c == 0 || self.w_p == 0 || self.w_p > self.chroma().bins() || !(self.w_t > 0.0) {
            return Err(Error::InvalidParameter("dictionary needs c >= 1, w_t > 0 and w_p in 1..=B"));
        }
        if self.q == 0 || self.r == 0 || self.q * self.r < 2 || self.q > self.chroma().bins() {
            return Err(Error::InvalidParameter("descriptor block q x r must hold at least two coefficients"));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor < 1.0) {
            return Err(Error::InvalidParameter("noise_floor must be in [0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.theta_max > 0.0) {
            return Err(Error::InvalidParameter("alpha must be in (0, 1] and theta_max positive"));
        }
        if !(self.delta > 0.0 && self.vote_hop > 0.0) || !(self.r_frac > 0.5 && self.r_frac <= 1.0) {
            return Err(Error::InvalidParameter("vote needs delta, hop > 0 and r_frac in (1/2, 1]"));
        }
        if !(self.a_min > 0.0 && self.a_max > self.a_min)
            || !(self.a_bin_octaves > 0.0 && self.b_bin_s > 0.0 && self.sigma_bins >= 0.0)
            || !(self.delta_a_rel > 0.0 && self.delta_b > 0.0)
            || self.min_support < 2
        {
            return Err(Error::InvalidParameter("localization histogram or pruning parameter out of range"));
        }
        Ok(())
    }

    /// Set one key from its text form. Does not validate the result.
    pub fn set(&mut self, key: &str, value: &str) -> core::result::Result<(), KeyError> {
        let v = value.trim();
        match key.trim() {
            "fs" => self.fs = parse(key, v)?,
            "window_s" => self.window_s = parse(key, v)?,
            "overlap" => self.overlap = parse(key, v)?,
            "m" => self.m = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "f0" => self.f0 = parse(key, v)?,
            "c" => self.c = parse(key, v)?,
            "w_t" => self.w_t = parse(key, v)?,
            "w_p" => self.w_p = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "s_min" => self.s_min = parse(key, v)?,
            "s_max" => self.s_max = parse(key, v)?,
            "num_scales" => self.num_scales = parse(key, v)?,
            "q" => self.q = parse(key, v)?,
            "r" => self.r = parse(key, v)?,
            "max_per_second" => self.max_per_second = parse(key, v)?,
            "noise_floor" => self.noise_floor = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "theta_max" => self.theta_max = parse(key, v)?,
            "match_mode" => {
                self.match_mode = match v {
                    "cross_song" => MatchMode::CrossSong,
                    "literal" => MatchMode::Literal,
                    _ => return Err(KeyError::BadValue { key: key.to_string(), value: v.to_string() }),
                }
            }
            "delta" => self.delta = parse(key, v)?,
            "r_frac" => self.r_frac = parse(key, v)?,
            "vote_hop" => self.vote_hop = parse(key, v)?,
            "min_window_matches" => self.min_window_matches = parse(key, v)?,
            "a_bin_octaves" => self.a_bin_octaves = parse(key, v)?,
            "a_min" => self.a_min = parse(key, v)?,
            "a_max" => self.a_max = parse(key, v)?,
            "b_bin_s" => self.b_bin_s = parse(key, v)?,
            "sigma_bins" => self.sigma_bins = parse(key, v)?,
            "delta_a_rel" => self.delta_a_rel = parse(key, v)?,
            "delta_b" => self.delta_b = parse(key, v)?,
            "min_support" => self.min_support = parse(key, v)?,
            other => return Err(KeyError::Unknown(other.to_string())),
        }
        Ok(())
    }

    /// All keys with their current values; feeding them back through
    /// [`Config::set`] reproduces `self` exactly.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mode = match self.match_mode {
            MatchMode::CrossSong => "cross_song",
            MatchMode::Literal => "literal",
        };
        let vals = [
            format!("{}", self.fs),
            format!("{:?}", self.window_s),
            format!("{:?}", self.overlap),
            format!("{}", self.m),
            format!("{}", self.n),
            format!("{:?}", self.f0),
            format!("{}", self.c),
            format!("{:?}", self.w_t),
            format!("{}", self.w_p),
            format!("{}", self.seed),
            format!("{:?}", self.s_min),
            format!("{:?}", self.s_max),
            format!("{}", self.num_scales),
            format!("{}", self.q),
            format!("{}", self.r),
            format!("{}", self.max_per_second),
            format!("{:?}", self.noise_floor),
            format!("{:?}", self.alpha),
            format!("{:?}", self.theta_max),
            mode.to_string(),
            format!("{:?}", self.delta),
            format!("{:?}", self.r_frac),
            format!("{:?}", self.vote_hop),
            format!("{}", self.min_window_matches),
            format!("{:?}", self.a_bin_octaves),
            format!("{:?}", self.a_min),
            format!("{:?}", self.a_max),
            format!("{:?}", self.b_bin_s),
            format!("{:?}", self.sigma_bins),
            format!("{:?}", self.delta_a_rel),
            format!("{:?}", self.delta_b),
            format!("{}", self.min_support),
        ];
        KEYS.iter().copied().zip(vals).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.chroma(), ChromaParams::default());
        assert_eq!(c.detect(), DetectParams::default());
        assert_eq!(c.dictionary(), DictionaryConfig::default());
    }

    #[test]
    fn entries_round_trip() {
        let c = Config { alpha: 0.1 + 0.2, match_mode: MatchMode::Literal, max_per_second: 0, ..Config::default() };
        let mut back = Config::default();
        for (k, v) in c.entries() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, c);
        assert_eq!(c.entries().len(), KEYS.len());
    }

    #[test]
    fn unknown_and_bad_keys() {
        let mut c = Config::default();
        assert_eq!(c.set("alpah", "0.5"), Err(KeyError::Unknown("alpah".into())));
        assert!(matches!(c.set("m", "-3"), Err(KeyError::BadValue { .. })));
        assert!(matches!(c.set("match_mode", "fuzzy"), Err(KeyError::BadValue { .. })));
        c.set("r_frac", "0.4").unwrap();
        assert!(c.validate().is_err());
    }
}
