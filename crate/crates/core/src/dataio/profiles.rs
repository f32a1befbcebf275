//! Codec profile configuration in TOML.
//!
//! ```toml
//! [[profile]]
//! name = "g729-legacy"
//! ro = 94.2
//! advantage = 0.0
//! loss_a = 10.0
//! loss_b = 25.21
//! loss_c = 20.2
//! bias = [0.4327, 0.6654, -0.03461, 0.03563, 0.004689, 0.000379, -0.0004205, -3.98e-8, -2.52e-7]
//! ```
//!
//! `ro` defaults to 93.2, `advantage` to 0 and `loss_scale` to 100. The
//! built-in `g729` profile is always present; a file entry with that name
//! replaces it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BiasPolynomial, CodecProfile, DEFAULT_RO};

/// Environment variable naming a default profile file.
pub const PROFILE_PATH_ENV: &str = "EMODEL_PROFILES";

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(default)]
    profile: Vec<ProfileEntry>,
}

fn default_ro() -> f64 {
    DEFAULT_RO
}

fn default_scale() -> f64 {
    100.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileEntry {
    name: String,
    #[serde(default = "default_ro")]
    ro: f64,
    #[serde(default)]
    advantage: f64,
    loss_a: f64,
    loss_b: f64,
    loss_c: f64,
    #[serde(default = "default_scale")]
    loss_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
}

impl ProfileEntry {
    fn into_profile(self) -> Result<CodecProfile> {
        let bias = match self.bias {
            None => None,
            Some(v) => {
                let arr: [f64; 9] = v.as_slice().try_into().map_err(|_| {
                    Error::Config(format!(
                        "profile '{}': bias needs 9 coefficients, got {}",
                        self.name,
                        v.len()
                    ))
                })?;
                Some(BiasPolynomial(arr))
            }
        };
        let p = CodecProfile {
            name: self.name,
            ro: self.ro,
            advantage: self.advantage,
            loss_a: self.loss_a,
            loss_b: self.loss_b,
            loss_c: self.loss_c,
            loss_scale: self.loss_scale,
            bias,
        };
        p.validate()?;
        Ok(p)
    }

    fn from_profile(p: &CodecProfile) -> Self {
        Self {
            name: p.name.clone(),
            ro: p.ro,
            advantage: p.advantage,
            loss_a: p.loss_a,
            loss_b: p.loss_b,
            loss_c: p.loss_c,
            loss_scale: p.loss_scale,
            bias: p.bias.map(|b| b.0.to_vec()),
        }
    }
}

/// Parses a profile file and merges it over the built-in profiles.
pub fn load_codec_profiles(source: &str) -> Result<BTreeMap<String, CodecProfile>> {
    let file: ProfileFile =
        toml::from_str(source).map_err(|e| Error::Config(format!("profile file: {e}")))?;
    let mut from_file: BTreeMap<String, CodecProfile> = BTreeMap::new();
    for entry in file.profile {
        let p = entry.into_profile()?;
        if from_file.contains_key(&p.name) {
            return Err(Error::Config(format!(
                "duplicate profile name '{}'",
                p.name
            )));
        }
        from_file.insert(p.name.clone(), p);
    }
    let mut out = builtin_profiles();
    out.extend(from_file);
    Ok(out)
}

pub fn builtin_profiles() -> BTreeMap<String, CodecProfile> {
    let g = CodecProfile::g729();
    BTreeMap::from([(g.name.clone(), g)])
}

/// Canonical TOML for a set of profiles, in name order.
pub fn profiles_to_toml<'a>(
    profiles: impl IntoIterator<Item = &'a CodecProfile>,
) -> Result<String> {
    let mut entries: Vec<ProfileEntry> = profiles
        .into_iter()
        .map(ProfileEntry::from_profile)
        .collect();
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    toml::to_string(&ProfileFile { profile: entries })
        .map_err(|e| Error::Config(format!("serializing profiles: {e}")))
}
