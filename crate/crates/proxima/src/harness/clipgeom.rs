//! Per-term clip geometry: tabulates one surrogate term as a function of
//! the probability ratio, for a positive or negative unit advantage — the
//! plateau-and-kink curves that make the clipping visible.

use crate::error::{Error, Result};
use crate::objectives::clip_term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageSign {
    Positive,
    Negative,
}

impl AdvantageSign {
    pub fn advantage(&self) -> f64 {
        match self {
            AdvantageSign::Positive => 1.0,
            AdvantageSign::Negative => -1.0,
        }
    }
}

impl std::str::FromStr for AdvantageSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" | "positive" | "+" => Ok(AdvantageSign::Positive),
            "neg" | "negative" | "-" => Ok(AdvantageSign::Negative),
            _ => Err(Error::Usage(format!("advantage sign must be pos or neg, got '{s}'"))),
        }
    }
}

/// (r, clip_term(r, ±1, ε)) over the grid. All grid ratios must be positive.
pub fn clip_geometry_table(
    sign: AdvantageSign,
    epsilon: f64,
    r_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    if r_grid.iter().any(|&r| r <= 0.0) {
        return Err(Error::Config("ratio grid must be strictly positive".into()));
    }
    let adv = sign.advantage();
    Ok(r_grid.iter().map(|&r| (r, clip_term(r, adv, epsilon))).collect())
}

pub fn table_csv(table: &[(f64, f64)]) -> String {
    let mut s = String::from("r,clip_term\n");
    for (r, v) in table {
        s.push_str(&format!("{r:?},{v:?}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_advantage_plateau() {
        let t = clip_geometry_table(AdvantageSign::Positive, 0.2, &[1.0, 1.2, 2.0]).unwrap();
        assert_eq!(t[0].1, 1.0); // r = 1 equals the advantage
        assert_eq!(t[1].1, 1.2);
        assert_eq!(t[2].1, 1.2); // flat above 1+ε
    }

    #[test]
    fn negative_advantage_has_no_plateau_on_worsening_side() {
        let t = clip_geometry_table(AdvantageSign::Negative, 0.2, &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(t[0].1, -0.8); // flat below 1−ε
        assert_eq!(t[1].1, -1.0);
        assert_eq!(t[2].1, -2.0); // linear continuation where it worsens
    }

    #[test]
    fn rejects_nonpositive_grid() {
        assert!(clip_geometry_table(AdvantageSign::Positive, 0.2, &[0.0, 1.0]).is_err());
    }
}
