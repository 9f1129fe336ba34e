//! Small geometric helpers shared across modules.
//!
//! Points are stored as `[f64; 3]` with the trailing coordinates zeroed when
//! the ambient dimension is 2, so the same code paths serve d = 2 and d = 3.

pub type Point = [f64; 3];

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Point, b: Point, dim: usize) -> f64 {
    a[..dim].iter().zip(&b[..dim]).map(|(x, y)| x * y).sum()
}

pub fn norm(a: Point, dim: usize) -> f64 {
    dot(a, a, dim).sqrt()
}

/// Minimum-image displacement `a - b` in a periodic box of side `l`.
pub fn periodic_delta(a: Point, b: Point, l: f64, dim: usize) -> Point {
    let mut d = sub(a, b);
    for c in d.iter_mut().take(dim) {
        *c -= l * (*c / l).round();
    }
    d
}

/// An orthonormal frame whose first axis is `axis` (assumed unit length).
/// Returns the remaining `dim - 1` axes.
pub fn orthonormal_complement(axis: Point, dim: usize) -> Vec<Point> {
    // pick the coordinate direction least aligned with `axis` as a seed
    let mut seed = [0.0; 3];
    let mut best = 0;
    for i in 1..dim {
        if axis[i].abs() < axis[best].abs() {
            best = i;
        }
    }
    seed[best] = 1.0;
    let mut u = sub(seed, scale(axis, dot(seed, axis, dim)));
    let nu = norm(u, dim);
    u = scale(u, 1.0 / nu);
    if dim == 2 {
        vec![u]
    } else {
        // v = axis x u
        let v = [
            axis[1] * u[2] - axis[2] * u[1],
            axis[2] * u[0] - axis[0] * u[2],
            axis[0] * u[1] - axis[1] * u[0],
        ];
        vec![u, v]
    }
}

/// Compensated (Kahan) summation, used wherever reductions feed reported
/// numbers: keeps results independent of chunking and accurate to O(eps).
#[derive(Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = KahanSum::default();
    for x in it {
        acc.add(x);
    }
    acc.value()
}
