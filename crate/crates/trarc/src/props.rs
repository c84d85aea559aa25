//! Propagation accounting.
//!
//! Cost is measured in per-sample passes: one per function value, two per
//! gradient, and two per Hessian-vector product, so one iteration costs
//! `|S_h| + 2|S_g| + 2γ|S_B|` where `γ` is the number of HVPs the inner
//! solver consumed. The four inexactness variants differ only through the
//! set sizes they plug into this formula.

/// Sizes of the three sample sets used in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetSizes {
    pub h: usize,
    pub g: usize,
    pub b: usize,
}

/// `|S_h| + 2|S_g| + 2γ|S_B|`.
pub fn props_for_iteration(sizes: SetSizes, gamma: usize) -> u64 {
    sizes.h as u64 + 2 * sizes.g as u64 + 2 * gamma as u64 * sizes.b as u64
}

/// Running propagation total for one run.
#[derive(Debug, Clone, Copy, Default)]
pub struct PropCounter {
    cumulative: u64,
}

impl PropCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges one iteration and returns the new cumulative total.
    pub fn charge(&mut self, sizes: SetSizes, gamma: usize) -> u64 {
        self.cumulative += props_for_iteration(sizes, gamma);
        self.cumulative
    }

    pub fn total(&self) -> u64 {
        self.cumulative
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_substitution() {
        let s = SetSizes { h: 100, g: 50, b: 25 };
        assert_eq!(props_for_iteration(s, 3), 350);
    }

    #[test]
    fn full_variant_matches_closed_form() {
        let n = 1000;
        let s = SetSizes { h: n, g: n, b: n };
        assert_eq!(props_for_iteration(s, 2), 7000);
        assert_eq!(props_for_iteration(s, 2), (n + 2 * n + 2 * 2 * n) as u64);
    }

    #[test]
    fn zero_gamma_drops_hessian_term() {
        let s = SetSizes { h: 10, g: 20, b: 30 };
        assert_eq!(props_for_iteration(s, 0), 50);
    }

    #[test]
    fn variant_ordering_is_strict() {
        // With subsample sizes strictly below n and equal γ, the four
        // variants order strictly.
        for &(n, sub, gamma) in &[(100usize, 5usize, 1usize), (1000, 50, 7), (20, 19, 3)] {
            let full = props_for_iteration(SetSizes { h: n, g: n, b: n }, gamma);
            let sh = props_for_iteration(SetSizes { h: n, g: n, b: sub }, gamma);
            let shg = props_for_iteration(SetSizes { h: n, g: sub, b: sub }, gamma);
            let shgf = props_for_iteration(SetSizes { h: sub, g: sub, b: sub }, gamma);
            assert!(shgf < shg && shg < sh && sh < full);
        }
    }

    #[test]
    fn counter_accumulates_without_drift() {
        let mut c = PropCounter::new();
        let mut manual = 0u64;
        for k in 1..=10u64 {
            let sizes = SetSizes {
                h: (k * 3) as usize,
                g: (k * 2) as usize,
                b: k as usize,
            };
            manual += props_for_iteration(sizes, k as usize);
            assert_eq!(c.charge(sizes, k as usize), manual);
        }
        assert_eq!(c.total(), manual);
    }
}
