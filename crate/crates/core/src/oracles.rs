//! Face-counting invariants: f-vectors, h-vectors of complete simplicial
//! fans and toric g-polynomials of polytopes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fan::{ConeId, Fan};

/// Graded poset of faces with a bottom element of dimension -1.
#[derive(Clone, Debug)]
pub struct FaceLattice {
    dims: Vec<i32>,
    /// Strictly smaller elements of each element.
    below: Vec<Vec<usize>>,
}

impl FaceLattice {
    /// Faces of a polytope from an order relation. Validates gradedness and
    /// the diamond property.
    pub fn new(dims: Vec<i32>, below: Vec<Vec<usize>>) -> Result<Self> {
        let lattice = Self { dims, below };
        lattice.validate()?;
        Ok(lattice)
    }

    /// Face lattice of the polytope whose cone is `sigma`: the face `τ` of
    /// `sigma` corresponds to a face of dimension `dim τ - 1`.
    pub fn of_cone(fan: &Fan, sigma: ConeId) -> Result<Self> {
        let faces = fan.faces(sigma);
        let index: BTreeMap<ConeId, usize> = faces.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let dims = faces.iter().map(|c| fan.cone(*c).dim as i32 - 1).collect();
        let below = faces
            .iter()
            .map(|c| fan.faces(*c).iter().filter(|f| *f != c).map(|f| index[f]).collect())
            .collect();
        Self::new(dims, below)
    }

    /// Face lattice of the polytope whose face fan is the complete fan
    /// `fan`: a cone of dimension `i` is a face of dimension `i - 1`, and a
    /// top element is added.
    pub fn of_complete_fan(fan: &Fan) -> Result<Self> {
        if !fan.is_complete() {
            return Err(Error::Precondition("fan is not complete".into()));
        }
        let count = fan.len();
        let mut dims: Vec<i32> = fan.cones().iter().map(|c| c.dim as i32 - 1).collect();
        let mut below: Vec<Vec<usize>> = fan
            .cones()
            .iter()
            .map(|c| fan.faces(c.id).iter().filter(|f| **f != c.id).map(|f| f.0).collect())
            .collect();
        dims.push(fan.dim() as i32);
        below.push((0..count).collect());
        Self::new(dims, below)
    }

    /// Toric h-polynomial of the top element, lowest degree first.
    pub fn h_polynomial(&self) -> Vec<i64> {
        let top = self.top();
        self.h_of(top, &mut BTreeMap::new())
    }

    fn top(&self) -> usize {
        (0..self.len()).max_by_key(|&i| (self.dims[i], self.below[i].len())).expect("nonempty lattice")
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(format!("malformed face lattice: {m}")));
        let bottoms: Vec<usize> = (0..self.len()).filter(|&i| self.below[i].is_empty()).collect();
        if bottoms.len() != 1 || self.dims[bottoms[0]] != -1 {
            return bad("expected a single bottom element of dimension -1".into());
        }
        for x in 0..self.len() {
            for &y in &self.below[x] {
                if self.dims[y] >= self.dims[x] {
                    return bad(format!("element {y} below {x} does not have smaller dimension"));
                }
            }
            // diamond property for intervals of length two
            for &z in &self.below[x] {
                if self.dims[z] != self.dims[x] - 2 {
                    continue;
                }
                let middle = self.below[x]
                    .iter()
                    .filter(|&&y| self.dims[y] == self.dims[x] - 1 && self.below[y].contains(&z))
                    .count();
                if middle != 2 {
                    return bad(format!("interval from {z} to {x} has {middle} middle elements"));
                }
            }
        }
        Ok(())
    }

    /// Toric g-polynomial of the top element.
    pub fn g_polynomial(&self) -> Vec<i64> {
        let top = self.top();
        let mut memo: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
        let mut g = self.g_of(top, &mut memo);
        while g.len() > 1 && g.last() == Some(&0) {
            g.pop();
        }
        g
    }

    fn g_of(&self, x: usize, memo: &mut BTreeMap<usize, Vec<i64>>) -> Vec<i64> {
        if let Some(g) = memo.get(&x) {
            return g.clone();
        }
        let d = self.dims[x];
        let g = if d < 0 {
            vec![1]
        } else {
            let h = self.h_of(x, memo);
            let mut g = vec![h[0]];
            for i in 1..=(d / 2) as usize {
                g.push(h.get(i).copied().unwrap_or(0) - h[i - 1]);
            }
            g
        };
        memo.insert(x, g.clone());
        g
    }

    /// `h(P, t) = Σ_{F < P} g(F, t) (t - 1)^{dim P - 1 - dim F}`.
    fn h_of(&self, x: usize, memo: &mut BTreeMap<usize, Vec<i64>>) -> Vec<i64> {
        let d = self.dims[x];
        let mut h = vec![0i64; (d + 1) as usize];
        for &f in &self.below[x] {
            let g = self.g_of(f, memo);
            let term = poly_mul(&g, &t_minus_one_pow((d - 1 - self.dims[f]) as u32));
            for (i, c) in term.into_iter().enumerate() {
                h[i] += c;
            }
        }
        h
    }
}

fn poly_mul(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of `(t - 1)^e`, lowest degree first.
fn t_minus_one_pow(e: u32) -> Vec<i64> {
    let mut out = vec![1i64];
    for _ in 0..e {
        out = poly_mul(&out, &[-1, 1]);
    }
    out
}

/// `f_{i-1}` = number of `i`-dimensional cones, for `i = 0..=n`.
pub fn f_vector(fan: &Fan) -> Vec<usize> {
    (0..=fan.dim()).map(|d| fan.cones_of_dim(d).count()).collect()
}

/// h-vector of a complete simplicial fan: coefficients of
/// `Σ_i f_{i-1} (t - 1)^{n - i}`, lowest degree first.
pub fn h_vector(fan: &Fan) -> Result<Vec<i64>> {
    if !fan.is_simplicial() || !fan.is_complete() {
        return Err(Error::Precondition("h-vector needs a complete simplicial fan".into()));
    }
    let n = fan.dim();
    let f = f_vector(fan);
    let mut h = vec![0i64; n + 1];
    for (i, fi) in f.iter().enumerate() {
        for (j, c) in t_minus_one_pow((n - i) as u32).into_iter().enumerate() {
            h[j] += *fi as i64 * c;
        }
    }
    Ok(h)
}

/// Multiset `{-n + 2j with multiplicity coeffs[j]}`, sorted.
pub fn degrees_from_coefficients(n: usize, coeffs: &[i64]) -> Vec<i32> {
    let mut out = Vec::new();
    for (j, c) in coeffs.iter().enumerate() {
        for _ in 0..(*c).max(0) {
            out.push(-(n as i32) + 2 * j as i32);
        }
    }
    out
}

/// Expected generator degrees of the minimal complex at `sigma`, from the
/// g-polynomial of the polytope whose cone is `sigma`.
pub fn predicted_stalk(fan: &Fan, sigma: ConeId) -> Result<Vec<i32>> {
    let g = FaceLattice::of_cone(fan, sigma)?.g_polynomial();
    Ok(degrees_from_coefficients(fan.dim(), &g))
}

/// Expected generator degrees of the lowest cohomology of a complete
/// simplicial fan.
pub fn predicted_ih(fan: &Fan) -> Result<Vec<i32>> {
    Ok(degrees_from_coefficients(fan.dim(), &h_vector(fan)?))
}

/// Expected generator degrees of the lowest cohomology of a complete fan,
/// from the toric h-polynomial of the polytope whose face fan it is.
pub fn predicted_ih_toric(fan: &Fan) -> Result<Vec<i32>> {
    Ok(degrees_from_coefficients(fan.dim(), &FaceLattice::of_complete_fan(fan)?.h_polynomial()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_cone() -> Fan {
        let mut rays = Vec::new();
        for a in [1, -1] {
            for b in [1, -1] {
                for c in [1, -1] {
                    rays.push(vec![a, b, c, 1]);
                }
            }
        }
        Fan::single_cone(4, rays).unwrap()
    }

    #[test]
    fn h_vectors() {
        let p1 = Fan::new(1, vec![vec![1], vec![-1]], vec![vec![0], vec![1]]).unwrap();
        assert_eq!(h_vector(&p1).unwrap(), vec![1, 1]);
        let p2 = Fan::new(2, vec![vec![1, 0], vec![0, 1], vec![-1, -1]], vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(f_vector(&p2), vec![1, 3, 3]);
        assert_eq!(h_vector(&p2).unwrap(), vec![1, 1, 1]);
        let p1p1 = Fan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1]],
            vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
        )
        .unwrap();
        assert_eq!(h_vector(&p1p1).unwrap(), vec![1, 2, 1]);
        let quadrant = Fan::single_cone(2, vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(h_vector(&quadrant).is_err());
    }

    #[test]
    fn g_polynomials() {
        let point = Fan::single_cone(1, vec![vec![1]]).unwrap();
        assert_eq!(FaceLattice::of_cone(&point, point.maximal_cones()[0]).unwrap().g_polynomial(), vec![1]);
        let square = Fan::single_cone(3, vec![vec![1, 0, 1], vec![0, 1, 1], vec![-1, 0, 1], vec![0, -1, 1]]).unwrap();
        assert_eq!(FaceLattice::of_cone(&square, square.maximal_cones()[0]).unwrap().g_polynomial(), vec![1, 1]);
        let cube = cube_cone();
        assert_eq!(FaceLattice::of_cone(&cube, cube.maximal_cones()[0]).unwrap().g_polynomial(), vec![1, 4]);
        assert_eq!(predicted_stalk(&cube, cube.maximal_cones()[0]).unwrap(), vec![-4, -2, -2, -2, -2]);
    }

    #[test]
    fn simplices_have_trivial_g() {
        for n in 1..5 {
            let rays: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
            let f = Fan::single_cone(n, rays).unwrap();
            assert_eq!(FaceLattice::of_cone(&f, f.maximal_cones()[0]).unwrap().g_polynomial(), vec![1]);
        }
    }

    #[test]
    fn toric_h_of_complete_fans() {
        // face fan of the 3-cube
        let mut rays = Vec::new();
        for a in [1, -1] {
            for b in [1, -1] {
                for c in [1, -1] {
                    rays.push(vec![a, b, c]);
                }
            }
        }
        let idx = |f: &dyn Fn(&Vec<i64>) -> bool| -> Vec<usize> { (0..8).filter(|&i| f(&rays[i])).collect() };
        let mut cones = Vec::new();
        for k in 0..3 {
            cones.push(idx(&|r: &Vec<i64>| r[k] == 1));
            cones.push(idx(&|r: &Vec<i64>| r[k] == -1));
        }
        let cube = Fan::new(3, rays.clone(), cones).unwrap();
        assert_eq!(FaceLattice::of_complete_fan(&cube).unwrap().h_polynomial(), vec![1, 5, 5, 1]);
        // agrees with the h-vector on simplicial fans
        let p2 = Fan::new(2, vec![vec![1, 0], vec![0, 1], vec![-1, -1]], vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(predicted_ih_toric(&p2).unwrap(), predicted_ih(&p2).unwrap());
    }

    #[test]
    fn malformed_lattice_is_rejected() {
        // a "segment" with three vertices
        let dims = vec![-1, 0, 0, 0, 1];
        let below = vec![vec![], vec![0], vec![0], vec![0], vec![0, 1, 2, 3]];
        assert!(FaceLattice::new(dims, below).is_err());
    }
}
