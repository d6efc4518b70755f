//! First-order finite elements: stiffness assembly and a preconditioned
//! conjugate-gradient solver for the symmetric positive definite systems.

use rayon::prelude::*;

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct Csr {
    /// Dimension.
    pub n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = (usize::MAX, usize::MAX);
        for (i, j, v) in t {
            if (i, j) == last {
                *data.last_mut().unwrap_or(&mut 0.0) += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = (i, j);
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self { n, indptr, indices, data }
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| (self.indptr[i]..self.indptr[i + 1]).map(|k| self.data[k] * x[self.indices[k]]).sum::<f64>();
        if self.n > 20_000 {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1]).find(|&k| self.indices[k] == i).map_or(0.0, |k| self.data[k])
            })
            .collect()
    }

    /// Principal submatrix on the index set `keep` (given as a map
    /// `old → Some(new)`).
    pub fn restrict(&self, map: &[Option<usize>], m: usize) -> Self {
        let mut t = Vec::new();
        for i in 0..self.n {
            let Some(ni) = map[i] else { continue };
            for k in self.indptr[i]..self.indptr[i + 1] {
                if let Some(nj) = map[self.indices[k]] {
                    t.push((ni, nj, self.data[k]));
                }
            }
        }
        Self::from_triplets(m, t)
    }
}

/// Global P1 stiffness matrix `K_ij = ∫∇χ_i·∇χ_j`.
pub fn stiffness(mesh: &Mesh) -> Csr {
    let mut t = Vec::with_capacity(9 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let a = mesh.area_of(tri);
        let g = mesh.hat_gradients(tri);
        for r in 0..3 {
            for c in 0..3 {
                t.push((tri[r], tri[c], a * (g[r][0] * g[c][0] + g[r][1] * g[c][1])));
            }
        }
    }
    Csr::from_triplets(mesh.points.len(), t)
}

/// `∫χ_i` for every hat function.
pub fn hat_integrals(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.points.len()];
    for tri in &mesh.triangles {
        let a = mesh.area_of(tri) / 3.0;
        for &i in tri {
            m[i] += a;
        }
    }
    m
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgInfo {
    /// Iterations used.
    pub iterations: usize,
    /// Final true relative residual `‖b − Ax‖/‖b‖`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() > 20_000 {
        // Fixed chunks summed in order: the result does not depend on the
        // thread schedule.
        let partial: Vec<f64> =
            a.par_chunks(4096).zip(b.par_chunks(4096)).map(|(x, y)| x.iter().zip(y).map(|(x, y)| x * y).sum()).collect();
        partial.iter().sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

/// Jacobi-preconditioned conjugate gradients to relative residual `tol`;
/// fails with a solver error if the true residual exceeds `accept`.
pub fn cg(a: &Csr, b: &[f64], tol: f64, accept: f64) -> Result<(Vec<f64>, CgInfo)> {
    let n = a.n;
    let bn = dot(b, b).sqrt();
    if bn == 0.0 {
        return Ok((vec![0.0; n], CgInfo { iterations: 0, relative_residual: 0.0 }));
    }
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n + 1000;
    let mut it = 0;
    while it < max_iter {
        if dot(&r, &r).sqrt() <= tol * bn {
            break;
        }
        a.mul(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    a.mul(&x, &mut ap);
    let res = ap.iter().zip(b).map(|(ax, b)| (b - ax) * (b - ax)).sum::<f64>().sqrt() / bn;
    if !(res <= accept) {
        return Err(Error::Solver(format!("conjugate gradients stalled at relative residual {res:.3e} after {it} iterations")));
    }
    Ok((x, CgInfo { iterations: it, relative_residual: res }))
}

/// [`cg`] followed by one defect-correction pass on the true residual,
/// pushing the error from the iteration tolerance towards roundoff.
pub fn cg_refined(a: &Csr, b: &[f64], tol: f64, accept: f64) -> Result<(Vec<f64>, CgInfo)> {
    let (mut x, info) = cg(a, b, tol, accept)?;
    let mut ax = vec![0.0; a.n];
    a.mul(&x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let (dx, more) = cg(a, &r, tol, 1.0)?;
    x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    a.mul(&x, &mut ax);
    let bn = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let res = ax.iter().zip(b).map(|(ax, b)| (b - ax) * (b - ax)).sum::<f64>().sqrt() / bn;
    Ok((x, CgInfo { iterations: info.iterations + more.iterations, relative_residual: res.min(info.relative_residual) }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_a_tridiagonal_system() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = Csr::from_triplets(n, t);
        let b = vec![1.0; n];
        let (x, info) = cg(&a, &b, 1e-13, 1e-10).unwrap();
        // Exact solution x_i = (i+1)(n−i)/2.
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - ((i + 1) * (n - i)) as f64 / 2.0).abs() < 1e-8);
        }
        assert!(info.relative_residual < 1e-12);
    }
}
