//! Compensated (Neumaier) accumulation used by every direct-sum kernel so
//! results do not drift with summation order.

#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Vector accumulator with one compensated sum per component.
#[derive(Debug, Clone)]
pub struct KahanVec {
    parts: Vec<KahanSum>,
}

impl KahanVec {
    pub fn zeros(dim: usize) -> Self {
        Self {
            parts: vec![KahanSum::new(); dim],
        }
    }

    #[inline]
    pub fn add_scaled(&mut self, v: &[f64], s: f64) {
        for (p, x) in self.parts.iter_mut().zip(v) {
            p.add(s * x);
        }
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, x: f64) {
        self.parts[i].add(x);
    }

    pub fn values(&self) -> Vec<f64> {
        self.parts.iter().map(KahanSum::value).collect()
    }
}
