//! Study population: planar coordinates per individual and the distance matrix.

use crate::error::{Error, Result};

/// Individuals indexed 0..n with fixed planar coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    coords: Vec<(f64, f64)>,
}

impl Population {
    /// Coordinates indexed by id. Coordinates must be finite and no two
    /// individuals may sit on exactly the same point (the distance kernel
    /// diverges at distance zero).
    pub fn new(coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPopulation("empty population".into()));
        }
        for (id, &(x, y)) in coords.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidPopulation(format!(
                    "non-finite coordinates for individual {id}"
                )));
            }
        }
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_by(|&a, &b| coords[a].partial_cmp(&coords[b]).unwrap());
        for w in order.windows(2) {
            if coords[w[0]] == coords[w[1]] {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::CoincidentPoints { a, b });
            }
        }
        Ok(Self { coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, id: usize) -> (f64, f64) {
        self.coords[id]
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }
}

/// Dense symmetric matrix of pairwise Euclidean distances, computed once and
/// shared by every likelihood evaluation and simulation step.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn compute(pop: &Population) -> Result<Self> {
        let n = pop.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            let (xi, yi) = pop.coord(i);
            for j in (i + 1)..n {
                let (xj, yj) = pop.coord(j);
                let dist = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                if dist == 0.0 {
                    return Err(Error::CoincidentPoints { a: i, b: j });
                }
                d[i * n + j] = dist;
                d[j * n + i] = dist;
            }
        }
        Ok(Self { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Row i as a slice indexed by j; the hot loop of the kernel sum.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

/// Euclidean distance between two planar points.
#[inline]
pub fn euclidean(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}
