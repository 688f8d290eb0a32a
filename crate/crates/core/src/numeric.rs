//! Small numeric helpers shared by the modules.

/// Neumaier compensated accumulator.
///
/// Used wherever long sums of probabilities or expectations are formed, so
/// that results are insensitive to the length of the sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a sequence.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Extended nonnegative reals `[0, ∞]`, used for `ψ'(1)`, `γ(0)` and the
/// argument of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

impl ExtReal {
    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinity)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinity => None,
        }
    }

    /// `self >= other` in the extended order.
    pub fn ge(self, other: ExtReal) -> bool {
        match (self, other) {
            (ExtReal::Infinity, _) => true,
            (ExtReal::Finite(_), ExtReal::Infinity) => false,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a >= b,
        }
    }

    /// Lossy conversion to `f64`, mapping `Infinity` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinity => f64::INFINITY,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::Infinity
        } else {
            ExtReal::Finite(v)
        }
    }
}
