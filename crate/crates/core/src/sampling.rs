//! Deterministic low-discrepancy sampling (Halton sequences with a
//! seed-derived toroidal shift). Identical seeds give identical samples.

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical-inverse (van der Corput) value of `index` in the given base.
pub fn radical_inverse(base: u32, mut index: u64) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    value
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Halton point generator over `[0, 1)^dim` with a per-dimension shift
/// derived from the seed.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    shifts: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "sampler supports up to {} dimensions", PRIMES.len());
        let shifts = (0..dim)
            .map(|i| {
                let bits = splitmix(seed.wrapping_add(0x100 + i as u64));
                (bits >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        Halton { dim, shifts }
    }

    /// The `index`-th point (1-based internally to skip the origin).
    pub fn point(&self, index: u64) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let v = radical_inverse(PRIMES[i], index + 1) + self.shifts[i];
                v - v.floor()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = Halton::new(4, 42);
        let b = Halton::new(4, 42);
        for i in 0..32 {
            assert_eq!(a.point(i), b.point(i));
        }
    }

    #[test]
    fn in_unit_cube_and_spread() {
        let h = Halton::new(2, 0);
        let n = 512;
        let mut mean = [0.0; 2];
        for i in 0..n {
            let p = h.point(i);
            assert!(p.iter().all(|&x| (0.0..1.0).contains(&x)));
            mean[0] += p[0];
            mean[1] += p[1];
        }
        for m in mean {
            let avg = m / n as f64;
            assert!((avg - 0.5).abs() < 0.05, "poorly spread samples: mean {avg}");
        }
    }
}
