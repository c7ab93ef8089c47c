//! Conservative interval arithmetic used to bound Jacobian entries over a
//! domain box. Soundness is the contract; tightness is not.

/// Closed interval with extended-real endpoints, `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn whole_line() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        if self.is_point() {
            self.lo
        } else {
            0.5 * (self.lo + self.hi)
        }
    }

    pub fn half_width(&self) -> f64 {
        if self.is_point() {
            0.0
        } else {
            0.5 * (self.hi - self.lo)
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Interval) -> Interval {
        Interval::new(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    pub fn mul(self, o: Interval) -> Interval {
        // Endpoint products with 0 * inf treated as 0: a zero factor pins the
        // sampled product to zero no matter how large the other range is.
        fn prod(a: f64, b: f64) -> f64 {
            if a == 0.0 || b == 0.0 {
                0.0
            } else {
                a * b
            }
        }
        let cands = [
            prod(self.lo, o.lo),
            prod(self.lo, o.hi),
            prod(self.hi, o.lo),
            prod(self.hi, o.hi),
        ];
        let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    pub fn powi(self, k: u32) -> Interval {
        fn powk(v: f64, k: u32) -> f64 {
            if v.is_infinite() {
                if k % 2 == 0 {
                    f64::INFINITY
                } else {
                    v
                }
            } else {
                v.powi(k as i32)
            }
        }
        match k {
            0 => Interval::point(1.0),
            1 => self,
            k if k % 2 == 1 => Interval::new(powk(self.lo, k), powk(self.hi, k)),
            k => {
                let a = powk(self.lo.abs(), k);
                let b = powk(self.hi.abs(), k);
                let hi = a.max(b);
                let lo = if self.contains(0.0) { 0.0 } else { a.min(b) };
                Interval::new(lo, hi)
            }
        }
    }

    /// Image under a nondecreasing function (used for tanh and arctan).
    pub fn monotone(self, f: impl Fn(f64) -> f64) -> Interval {
        let lo = if self.lo == f64::NEG_INFINITY {
            f(-1e308)
        } else {
            f(self.lo)
        };
        let hi = if self.hi == f64::INFINITY { f(1e308) } else { f(self.hi) };
        Interval::new(lo, hi)
    }
}
