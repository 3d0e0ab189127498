use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NpivError, Result};

/// One univariate factor of a (tensor-product) sieve space on [0, 1].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AxisSpec {
    /// B-splines of order `order` (degree `order - 1`) with uniform interior knots.
    BSpline { order: usize, interior_knots: usize },
    /// Periodized Daubechies wavelets with `vanishing_moments` N (2N filter taps):
    /// scaling functions at `coarse_level` plus wavelets on levels `coarse_level..fine_level`.
    Wavelet {
        vanishing_moments: usize,
        coarse_level: u32,
        fine_level: u32,
    },
    /// `1, √2 cos(πx), …, √2 cos((terms-1)πx)`; used as the aligned-eigenfunction fixture.
    Cosine { terms: usize },
}

impl AxisSpec {
    pub fn dim(&self) -> usize {
        match *self {
            AxisSpec::BSpline {
                order,
                interior_knots,
            } => order + interior_knots,
            AxisSpec::Wavelet { fine_level, .. } => 1usize << fine_level,
            AxisSpec::Cosine { terms } => terms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AxisSpec::BSpline { order, .. } if order == 0 => Err(NpivError::Config(
                "bspline order must be at least 1".into(),
            )),
            AxisSpec::BSpline { .. } => Ok(()),
            AxisSpec::Wavelet {
                vanishing_moments,
                coarse_level,
                fine_level,
            } => {
                if !(1..=3).contains(&vanishing_moments) {
                    return Err(NpivError::Config(format!(
                        "unsupported wavelet with {vanishing_moments} vanishing moments (supported: 1, 2, 3)"
                    )));
                }
                if fine_level < coarse_level {
                    return Err(NpivError::Config(format!(
                        "wavelet fine level {fine_level} below coarse level {coarse_level}"
                    )));
                }
                if fine_level > 16 {
                    return Err(NpivError::Config("wavelet fine level above 16".into()));
                }
                Ok(())
            }
            AxisSpec::Cosine { terms } if terms == 0 => {
                Err(NpivError::Config("cosine basis needs at least one term".into()))
            }
            AxisSpec::Cosine { .. } => Ok(()),
        }
    }

    /// Hölder smoothness of the basis functions, where defined.
    pub fn smoothness(&self) -> Option<f64> {
        match *self {
            AxisSpec::BSpline { order, .. } => Some(order as f64 - 2.0),
            // Hölder exponents of db1..db3 scaling functions
            AxisSpec::Wavelet {
                vanishing_moments, ..
            } => Some([0.0, 0.0, 0.55, 1.08][vanishing_moments]),
            AxisSpec::Cosine { .. } => None,
        }
    }
}

/// Declarative description of a tensor-product sieve space on [0, 1]^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SieveSpec {
    axes: Vec<AxisSpec>,
}

impl SieveSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        if axes.is_empty() {
            return Err(NpivError::Config("sieve spec needs at least one axis".into()));
        }
        for a in &axes {
            a.validate()?;
        }
        Ok(Self { axes })
    }

    pub fn univariate(axis: AxisSpec) -> Result<Self> {
        Self::new(vec![axis])
    }

    /// Same univariate factor on each of `d` axes.
    pub fn isotropic(axis: AxisSpec, d: usize) -> Result<Self> {
        Self::new(vec![axis; d])
    }

    pub fn bspline(order: usize, interior_knots: usize) -> Result<Self> {
        Self::univariate(AxisSpec::BSpline {
            order,
            interior_knots,
        })
    }

    /// B-spline space of the given order with total dimension `k` (needs `k ≥ order`).
    pub fn bspline_with_dim(order: usize, k: usize) -> Result<Self> {
        if k < order {
            return Err(NpivError::Config(format!(
                "bspline dimension {k} below order {order}"
            )));
        }
        Self::bspline(order, k - order)
    }

    pub fn wavelet(vanishing_moments: usize, coarse_level: u32, fine_level: u32) -> Result<Self> {
        Self::univariate(AxisSpec::Wavelet {
            vanishing_moments,
            coarse_level,
            fine_level,
        })
    }

    pub fn cosine(terms: usize) -> Result<Self> {
        Self::univariate(AxisSpec::Cosine { terms })
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn domain_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn dim(&self) -> usize {
        self.axes.iter().map(AxisSpec::dim).product()
    }

    /// Warning text when the basis smoothness does not exceed the target smoothness `p`.
    pub fn smoothness_warning(&self, p: f64) -> Option<String> {
        let gamma = self
            .axes
            .iter()
            .filter_map(AxisSpec::smoothness)
            .fold(f64::INFINITY, f64::min);
        (gamma.is_finite() && gamma <= p).then(|| {
            format!("basis smoothness {gamma} does not exceed function smoothness p = {p}")
        })
    }

    /// Univariate space of the same family with dimension `k`.
    pub fn with_dim(&self, k: usize) -> Result<Self> {
        let [axis] = self.axes() else {
            return Err(NpivError::Config("dimension rules need a univariate basis".into()));
        };
        match *axis {
            AxisSpec::BSpline { order, .. } => Self::bspline_with_dim(order, k),
            AxisSpec::Cosine { .. } => Self::cosine(k),
            AxisSpec::Wavelet {
                vanishing_moments,
                coarse_level,
                ..
            } => {
                if !k.is_power_of_two() {
                    return Err(NpivError::Config(format!("wavelet dimension {k} is not a power of two")));
                }
                let fine = k.trailing_zeros();
                Self::wavelet(vanishing_moments, coarse_level.min(fine), fine)
            }
        }
    }
}

impl fmt::Display for AxisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AxisSpec::BSpline {
                order,
                interior_knots,
            } => write!(f, "bspline:order={order},knots={interior_knots}"),
            AxisSpec::Wavelet {
                vanishing_moments,
                coarse_level,
                fine_level,
            } => write!(
                f,
                "wavelet:taps={},coarse={coarse_level},fine={fine_level}",
                2 * vanishing_moments
            ),
            AxisSpec::Cosine { terms } => write!(f, "cosine:terms={terms}"),
        }
    }
}

impl fmt::Display for SieveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.axes.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

fn parse_params(body: &str) -> Result<Vec<(String, usize)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                NpivError::Config(format!("expected key=value in basis spec, got `{kv}`"))
            })?;
            let v = v.trim().parse::<usize>().map_err(|_| {
                NpivError::Config(format!("basis spec value `{}` is not a count", v.trim()))
            })?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn take(params: &[(String, usize)], key: &str, family: &str) -> Result<usize> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| NpivError::Config(format!("{family} spec is missing `{key}`")))
}

impl FromStr for AxisSpec {
    type Err = NpivError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, body) = s.split_once(':').unwrap_or((s, ""));
        let params = parse_params(body)?;
        let known: &[&str] = match family {
            "bspline" => &["order", "knots"],
            "wavelet" => &["taps", "coarse", "fine"],
            "cosine" => &["terms"],
            "constant" => &[],
            other => {
                return Err(NpivError::Config(format!("unknown basis family `{other}`")));
            }
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(NpivError::Config(format!("unknown {family} parameter `{k}`")));
        }
        let axis = match family {
            "bspline" => AxisSpec::BSpline {
                order: take(&params, "order", family)?,
                interior_knots: take(&params, "knots", family)?,
            },
            "wavelet" => {
                let taps = take(&params, "taps", family)?;
                if taps % 2 != 0 {
                    return Err(NpivError::Config(format!("wavelet taps {taps} must be even")));
                }
                let level = |key| -> Result<u32> {
                    u32::try_from(take(&params, key, family)?)
                        .map_err(|_| NpivError::Config(format!("wavelet {key} out of range")))
                };
                AxisSpec::Wavelet {
                    vanishing_moments: taps / 2,
                    coarse_level: level("coarse")?,
                    fine_level: level("fine")?,
                }
            }
            "cosine" => AxisSpec::Cosine {
                terms: take(&params, "terms", family)?,
            },
            // order-1 spline without knots: the constant function
            _ => AxisSpec::BSpline {
                order: 1,
                interior_knots: 0,
            },
        };
        axis.validate()?;
        Ok(axis)
    }
}

impl FromStr for SieveSpec {
    type Err = NpivError;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .split('*')
            .map(str::parse::<AxisSpec>)
            .collect::<Result<Vec<_>>>()?;
        SieveSpec::new(axes)
    }
}

impl Serialize for SieveSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SieveSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
