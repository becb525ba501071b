//! Distributional distances between foreground CDFs and the per-image
//! harmonization report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Histogram, NormalizedCdf};

pub const DEFAULT_KL_EPSILON: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HarmonizeReport {
    pub foreground_count: u64,
    /// Masked pixels of value 0, excluded from the histogram.
    pub dropped_zero_valued: u64,
    /// Masked pixels that fell into the background bin of the matching grid.
    pub rebin_remainder: u64,
    /// Nonzero pixels outside the mask, set to 0 in the output.
    pub zeroed_outside_mask: u64,
    pub pre_distance: f64,
    pub post_distance: f64,
    pub rebin_applied: bool,
    pub grid_bits: u8,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl HarmonizeReport {
    pub const CSV_HEADER: &'static str = "image,foreground_count,dropped_zero_valued,rebin_remainder,zeroed_outside_mask,pre_distance,post_distance,rebin_applied,grid_bits";

    pub fn csv_row(&self, image: &str) -> String {
        format!(
            "{image},{},{},{},{},{},{},{},{}",
            self.foreground_count,
            self.dropped_zero_valued,
            self.rebin_remainder,
            self.zeroed_outside_mask,
            self.pre_distance,
            self.post_distance,
            self.rebin_applied,
            self.grid_bits
        )
    }
}

fn same_depth(a: u8, b: u8) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{a}-bit vs {b}-bit distribution")))
    }
}

/// L1 gap between two CDFs on the normalized intensity axis, i.e. the
/// 1-Wasserstein distance between the underlying distributions.
pub fn cdf_l1(a: &NormalizedCdf, b: &NormalizedCdf) -> Result<f64> {
    same_depth(a.bit_depth(), b.bit_depth())?;
    let sum: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / (a.bins() - 1) as f64)
}

/// KL divergence between epsilon-smoothed frequency vectors over bins
/// `1..len`. Both inputs must sum to 1 over those bins.
pub fn kl_frequencies(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} bins", p.len(), q.len())));
    }
    let bins = (p.len() - 1) as f64;
    let norm = 1.0 + epsilon * bins;
    Ok(p[1..]
        .iter()
        .zip(&q[1..])
        .map(|(&pk, &qk)| {
            let ps = (pk + epsilon) / norm;
            let qs = (qk + epsilon) / norm;
            ps * (ps / qs).ln()
        })
        .sum::<f64>())
}

/// `KL(p || q)` over the foreground bins with epsilon smoothing.
pub fn kl_divergence(p: &Histogram, q: &Histogram, epsilon: f64) -> Result<f64> {
    same_depth(p.bit_depth(), q.bit_depth())?;
    kl_frequencies(&p.frequencies()?, &q.frequencies()?, epsilon)
}

/// Mean and maximum of a set of distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub max: f64,
    pub pairs: usize,
}

impl Spread {
    fn of(values: &[f64]) -> Spread {
        if values.is_empty() {
            return Spread::default();
        }
        Spread {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(0.0, f64::max),
            pairs: values.len(),
        }
    }
}

/// Within-group, cross-group and to-reference CDF distances for two groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub within_a: Spread,
    pub within_b: Spread,
    pub cross: Spread,
    pub a_to_ref: Spread,
    pub b_to_ref: Spread,
}

impl GapReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,mean,max,pairs\n");
        for (name, s) in [
            ("within_a", self.within_a),
            ("within_b", self.within_b),
            ("cross", self.cross),
            ("a_to_ref", self.a_to_ref),
            ("b_to_ref", self.b_to_ref),
        ] {
            out.push_str(&format!("{name},{},{},{}\n", s.mean, s.max, s.pairs));
        }
        out
    }
}

pub fn gap_report(
    group_a: &[NormalizedCdf],
    group_b: &[NormalizedCdf],
    reference: &NormalizedCdf,
) -> Result<GapReport> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::EmptyForeground { image: None });
    }
    let within = |g: &[NormalizedCdf]| -> Result<Vec<f64>> {
        let mut d = Vec::new();
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                d.push(cdf_l1(&g[i], &g[j])?);
            }
        }
        Ok(d)
    };
    let mut cross = Vec::with_capacity(group_a.len() * group_b.len());
    for a in group_a {
        for b in group_b {
            cross.push(cdf_l1(a, b)?);
        }
    }
    let to_ref = |g: &[NormalizedCdf]| -> Result<Vec<f64>> { g.iter().map(|c| cdf_l1(c, reference)).collect() };
    Ok(GapReport {
        within_a: Spread::of(&within(group_a)?),
        within_b: Spread::of(&within(group_b)?),
        cross: Spread::of(&cross),
        a_to_ref: Spread::of(&to_ref(group_a)?),
        b_to_ref: Spread::of(&to_ref(group_b)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(bits: u8, at: usize) -> Histogram {
        let mut c = vec![0u64; 1 << bits];
        c[at] = 10;
        Histogram::from_counts(bits, c).unwrap()
    }

    #[test]
    fn l1_of_two_steps() {
        let a = step(3, 2).normalize_cdf().unwrap();
        let b = step(3, 6).normalize_cdf().unwrap();
        // the cdfs differ by exactly 1 on bins 2..=5
        let expected = 4.0 / 7.0;
        assert!((cdf_l1(&a, &b).unwrap() - expected).abs() < 1e-15);
        assert_eq!(cdf_l1(&a, &a).unwrap(), 0.0);
        assert_eq!(cdf_l1(&a, &b).unwrap(), cdf_l1(&b, &a).unwrap());
        assert!(cdf_l1(&a, &step(4, 2).normalize_cdf().unwrap()).is_err());
    }

    #[test]
    fn kl_identity_and_disjoint() {
        let a = step(4, 3);
        assert!(kl_divergence(&a, &a, DEFAULT_KL_EPSILON).unwrap().abs() < 1e-12);
        let d = kl_divergence(&a, &step(4, 9), DEFAULT_KL_EPSILON).unwrap();
        // ~ ln(1 / eps)
        assert!(d > 15.0, "{d}");
        assert!(kl_divergence(&a, &Histogram::empty(4).unwrap(), DEFAULT_KL_EPSILON).is_err());
    }

    #[test]
    fn gap_of_reference_groups_is_zero() {
        let r = step(3, 4).normalize_cdf().unwrap();
        let g = gap_report(std::slice::from_ref(&r), std::slice::from_ref(&r), &r).unwrap();
        assert_eq!(g.cross.mean, 0.0);
        assert_eq!(g.a_to_ref.max, 0.0);
        assert_eq!(g.cross.mean, g.cross.max);
        assert!(gap_report(&[], std::slice::from_ref(&r), &r).is_err());
    }

    #[test]
    fn singleton_groups_mean_equals_max() {
        let a = step(3, 2).normalize_cdf().unwrap();
        let b = step(3, 6).normalize_cdf().unwrap();
        let r = step(3, 4).normalize_cdf().unwrap();
        let g = gap_report(&[a], &[b], &r).unwrap();
        assert_eq!(g.cross.mean, g.cross.max);
        assert_eq!(g.a_to_ref.mean, g.a_to_ref.max);
        assert_eq!(g.to_csv().lines().count(), 6);
    }

    fn arb_hist() -> impl Strategy<Value = Histogram> {
        proptest::collection::vec(0u64..20, 32).prop_filter_map("empty", |mut c| {
            c[0] = 0;
            let h = Histogram::from_counts(5, c).unwrap();
            (h.total() > 0).then_some(h)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn kl_is_non_negative(p in arb_hist(), q in arb_hist()) {
            prop_assert!(kl_divergence(&p, &q, DEFAULT_KL_EPSILON).unwrap() >= 0.0);
        }
    }

    proptest! {
        #[test]
        fn l1_is_a_metric(a in arb_hist(), b in arb_hist(), c in arb_hist()) {
            let (a, b, c) = (a.normalize_cdf().unwrap(), b.normalize_cdf().unwrap(), c.normalize_cdf().unwrap());
            let ab = cdf_l1(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, cdf_l1(&b, &a).unwrap());
            prop_assert_eq!(ab == 0.0, a == b);
            prop_assert!(ab <= cdf_l1(&a, &c).unwrap() + cdf_l1(&c, &b).unwrap() + 1e-12);
        }
    }
}
