//! Standalone dimension counts for fans of dimension at most two.
//!
//! Nothing here uses the library. Polynomials on a full-dimensional cone
//! are polynomials in the ambient coordinates, on a ray of a plane fan they
//! are polynomials in the parameter along the primitive ray, and on the
//! origin they are constants. The minimal complex is built by taking, in
//! each degree, a complement of `m Z` in the boundary kernel `Z`.

#![allow(dead_code)]

use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rat {
    num: i128,
    den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Rat {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0);
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Rat { num: s * num / g, den: s * den / g }
    }
    pub fn int(n: i128) -> Self {
        Rat::new(n, 1)
    }
    pub fn zero() -> Self {
        Rat::int(0)
    }
    pub fn is_zero(self) -> bool {
        self.num == 0
    }
    pub fn add(self, o: Rat) -> Rat {
        Rat::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }
    pub fn sub(self, o: Rat) -> Rat {
        self.add(o.neg())
    }
    pub fn mul(self, o: Rat) -> Rat {
        Rat::new(self.num * o.num, self.den * o.den)
    }
    pub fn div(self, o: Rat) -> Rat {
        Rat::new(self.num * o.den, self.den * o.num)
    }
    pub fn neg(self) -> Rat {
        Rat { num: -self.num, den: self.den }
    }
}

/// Row reduction; returns the reduced rows.
fn reduce(mut rows: Vec<Vec<Rat>>) -> Vec<Vec<Rat>> {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let pivot = rows[r][c];
        for x in rows[r].iter_mut() {
            *x = x.div(pivot);
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c];
                for j in 0..ncols {
                    let v = rows[r][j];
                    rows[i][j] = rows[i][j].sub(f.mul(v));
                }
            }
        }
        r += 1;
    }
    rows.truncate(r);
    rows
}

pub fn rank(rows: &[Vec<Rat>]) -> usize {
    reduce(rows.to_vec()).len()
}

/// Basis of `{x : A x = 0}` for `A` with `ncols` columns.
pub fn nullspace(a: &[Vec<Rat>], ncols: usize) -> Vec<Vec<Rat>> {
    let red = reduce(a.to_vec());
    let mut pivots = Vec::new();
    for row in &red {
        pivots.push(row.iter().position(|x| !x.is_zero()).unwrap());
    }
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut x = vec![Rat::zero(); ncols];
        x[free] = Rat::int(1);
        for (row, &p) in red.iter().zip(&pivots) {
            x[p] = row[free].neg();
        }
        out.push(x);
    }
    out
}

/// Exponent vectors of total degree `e` in `v` variables.
fn monomials(v: usize, e: u32) -> Vec<Vec<u32>> {
    if v == 0 {
        return if e == 0 { vec![vec![]] } else { vec![] };
    }
    if v == 1 {
        return vec![vec![e]];
    }
    let mut out = Vec::new();
    for a in (0..=e).rev() {
        for mut rest in monomials(v - 1, e - a) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct BCone {
    pub rays: Vec<Vec<i64>>,
    pub facets: Vec<usize>,
}

/// A fan in dimension one or two given by rays and maximal cones.
#[derive(Clone, Debug)]
pub struct BFan {
    pub n: usize,
    pub cones: Vec<BCone>,
}

impl BFan {
    pub fn new(n: usize, rays: &[Vec<i64>], maximal: &[Vec<usize>]) -> Self {
        assert!(n == 1 || n == 2);
        let mut cones = vec![BCone { rays: vec![], facets: vec![] }];
        let mut ray_cone = BTreeMap::new();
        for (i, r) in rays.iter().enumerate() {
            ray_cone.insert(i, cones.len());
            cones.push(BCone { rays: vec![r.clone()], facets: vec![0] });
        }
        for m in maximal.iter().filter(|m| m.len() == 2) {
            cones.push(BCone { rays: m.iter().map(|&i| rays[i].clone()).collect(), facets: m.iter().map(|i| ray_cone[i]).collect() });
        }
        BFan { n, cones }
    }

    fn dim(&self, c: usize) -> usize {
        self.cones[c].rays.len()
    }

    /// Variables of the polynomial ring on the span of cone `c`.
    fn nvars(&self, c: usize) -> usize {
        match self.dim(c) {
            0 => 0,
            d if d == self.n => self.n,
            _ => 1,
        }
    }

    /// Restriction of a monomial from cone `src` to its face `tgt`.
    fn restrict(&self, src: usize, tgt: usize, exps: &[u32]) -> Option<(Rat, Vec<u32>)> {
        let total: u32 = exps.iter().sum();
        if self.dim(tgt) == 0 {
            return (total == 0).then(|| (Rat::int(1), vec![]));
        }
        if self.nvars(src) == self.nvars(tgt) {
            return Some((Rat::int(1), exps.to_vec()));
        }
        // full plane to a ray: x_i -> v_i s
        let v = &self.cones[tgt].rays[0];
        let mut c = Rat::int(1);
        for (i, &a) in exps.iter().enumerate() {
            for _ in 0..a {
                c = c.mul(Rat::int(v[i] as i128));
            }
        }
        if c.is_zero() {
            return None;
        }
        Some((c, vec![total]))
    }
}

/// A component: generator degrees and the total differential of each
/// generator, per facet, in that facet's piece of the generator's degree.
#[derive(Clone, Debug, Default)]
pub struct Comp {
    pub gens: Vec<i32>,
    pub images: Vec<Vec<Vec<Rat>>>,
}

pub struct BComplex<'a> {
    pub fan: &'a BFan,
    pub comps: Vec<Comp>,
}

impl<'a> BComplex<'a> {
    pub fn basis(&self, c: usize, d: i32) -> Vec<(usize, Vec<u32>)> {
        let mut out = Vec::new();
        for (j, &g) in self.comps[c].gens.iter().enumerate() {
            let e = d - g;
            if e >= 0 && e % 2 == 0 {
                for m in monomials(self.fan.nvars(c), (e / 2) as u32) {
                    out.push((j, m));
                }
            }
        }
        out
    }

    pub fn dim_at(&self, c: usize, d: i32) -> usize {
        self.basis(c, d).len()
    }

    /// Multiplies an element of cone `rho` in degree `d` by a monomial of
    /// the ring of `src`.
    fn act(&self, src: usize, rho: usize, d: i32, v: &[Rat], mono: &[u32]) -> Vec<Rat> {
        let e: u32 = mono.iter().sum();
        let target = self.basis(rho, d + 2 * e as i32);
        let mut out = vec![Rat::zero(); target.len()];
        let Some((coef, nu)) = self.fan.restrict(src, rho, mono) else { return out };
        for ((j, lam), x) in self.basis(rho, d).iter().zip(v) {
            if x.is_zero() {
                continue;
            }
            let prod: Vec<u32> = lam.iter().zip(&nu).map(|(a, b)| a + b).collect();
            let idx = target.iter().position(|(i, m)| i == j && *m == prod).unwrap();
            out[idx] = out[idx].add(coef.mul(*x));
        }
        out
    }

    /// Total differential of cone `c` in degree `d`, one column per basis
    /// element, stacked over the facets of `c`.
    fn differential(&self, c: usize, d: i32) -> Vec<Vec<Rat>> {
        let mut cols = Vec::new();
        for (j, mu) in self.basis(c, d) {
            let mut col = Vec::new();
            for (fi, &rho) in self.fan.cones[c].facets.iter().enumerate() {
                let g = self.comps[c].gens[j];
                col.extend(self.act(c, rho, g, &self.comps[c].images[j][fi], &mu));
            }
            cols.push(col);
        }
        cols
    }

    /// Block matrix of the total differential from `sources` to `targets`
    /// in degree `d`, as rows.
    pub fn block(&self, sources: &[usize], targets: &[usize], d: i32) -> Vec<Vec<Rat>> {
        let row_len: usize = targets.iter().map(|t| self.dim_at(*t, d)).sum();
        let mut cols: Vec<Vec<Rat>> = Vec::new();
        for &s in sources {
            let facets = &self.fan.cones[s].facets;
            for col in self.differential(s, d) {
                let mut full = vec![Rat::zero(); row_len];
                let mut src_off = 0;
                for &f in facets {
                    let len = self.dim_at(f, d);
                    if let Some(pos) = targets.iter().position(|t| *t == f) {
                        let off: usize = targets[..pos].iter().map(|t| self.dim_at(*t, d)).sum();
                        full[off..off + len].copy_from_slice(&col[src_off..src_off + len]);
                    }
                    src_off += len;
                }
                cols.push(full);
            }
        }
        transpose(&cols, row_len)
    }
}

fn transpose(cols: &[Vec<Rat>], nrows: usize) -> Vec<Vec<Rat>> {
    (0..nrows).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// Builds the minimal complex degree by degree on `[min, max]`.
pub fn minimal_complex(fan: &BFan, min: i32, max: i32) -> BComplex<'_> {
    let n = fan.n;
    let mut k = BComplex { fan, comps: vec![Comp::default(); fan.cones.len()] };
    k.comps[0].gens.push(-(n as i32));
    let mut order: Vec<usize> = (1..fan.cones.len()).collect();
    order.sort_by_key(|&c| fan.dim(c));
    for c in order {
        let facets = fan.cones[c].facets.clone();
        let mut codim2: Vec<usize> = facets.iter().flat_map(|f| fan.cones[*f].facets.clone()).collect();
        codim2.sort();
        codim2.dedup();
        let mut kernels: BTreeMap<i32, Vec<Vec<Rat>>> = BTreeMap::new();
        for d in min..=max {
            let w: usize = facets.iter().map(|f| k.dim_at(*f, d)).sum();
            let z = if codim2.is_empty() {
                (0..w).map(|i| (0..w).map(|j| Rat::int((i == j) as i128)).collect()).collect()
            } else {
                nullspace(&k.block(&facets, &codim2, d), w)
            };
            // m Z in degree d
            let mut span: Vec<Vec<Rat>> = Vec::new();
            for var in 0..fan.nvars(c) {
                let mono: Vec<u32> = (0..fan.nvars(c)).map(|i| (i == var) as u32).collect();
                for v in kernels.get(&(d - 2)).into_iter().flatten() {
                    let mut out = Vec::new();
                    let mut off = 0;
                    for &f in &facets {
                        let len = k.dim_at(f, d - 2);
                        out.extend(k.act(c, f, d - 2, &v[off..off + len], &mono));
                        off += len;
                    }
                    span.push(out);
                }
            }
            let mut r = rank(&span);
            for v in &z {
                span.push(v.clone());
                let r2 = rank(&span);
                if r2 > r {
                    r = r2;
                    let mut images = Vec::new();
                    let mut off = 0;
                    for &f in &facets {
                        let len = k.dim_at(f, d);
                        images.push(v[off..off + len].to_vec());
                        off += len;
                    }
                    k.comps[c].gens.push(d);
                    k.comps[c].images.push(images);
                } else {
                    span.pop();
                }
            }
            kernels.insert(d, z);
        }
    }
    k
}

/// Cohomology dimensions `(p, d) -> dim` of the total complex.
pub fn cohomology(k: &BComplex, min: i32, max: i32) -> BTreeMap<(i32, i32), usize> {
    let n = k.fan.n as i32;
    let in_degree = |p: i32| -> Vec<usize> { (0..k.fan.cones.len()).filter(|&c| -(k.fan.dim(c) as i32) == p).collect() };
    let mut out = BTreeMap::new();
    for d in min..=max {
        for p in -n..=0 {
            let here = in_degree(p);
            let dim: usize = here.iter().map(|c| k.dim_at(*c, d)).sum();
            let out_rank = if p < 0 { rank(&k.block(&here, &in_degree(p + 1), d)) } else { 0 };
            let in_rank = if p > -n { rank(&k.block(&in_degree(p - 1), &here, d)) } else { 0 };
            out.insert((p, d), dim - out_rank - in_rank);
        }
    }
    out
}

/// Is `v` in the cone generated by `rays` (at most two rays in the plane,
/// or one ray on the line)?
fn in_cone(rays: &[Vec<i64>], v: &[i64]) -> bool {
    match rays.len() {
        0 => v.iter().all(|x| *x == 0),
        1 => {
            let r = &rays[0];
            let cross = if r.len() == 2 { r[0] * v[1] - r[1] * v[0] } else { 0 };
            cross == 0 && r.iter().zip(v).map(|(a, b)| a * b).sum::<i64>() > 0
        }
        _ => {
            let (a, b) = (&rays[0], &rays[1]);
            let det = a[0] * b[1] - a[1] * b[0];
            let alpha = (v[0] * b[1] - v[1] * b[0]) * det.signum();
            let beta = (a[0] * v[1] - a[1] * v[0]) * det.signum();
            alpha >= 0 && beta >= 0
        }
    }
}

/// Dimensions of the direct image of `k` to `target` in degrees `[min, max]`,
/// per target cone index: elements of the sum over source cones of the
/// same dimension whose differential vanishes on interior faces and lies in
/// the direct image over the boundary.
pub fn pushforward_dims(k: &BComplex, target: &BFan, min: i32, max: i32) -> Vec<BTreeMap<i32, usize>> {
    let source = k.fan;
    // smallest target cone containing each source cone
    let assign: Vec<usize> = (0..source.cones.len())
        .map(|s| {
            (0..target.cones.len())
                .filter(|&t| source.cones[s].rays.iter().all(|r| in_cone(&target.cones[t].rays, r)))
                .min_by_key(|&t| target.dim(t))
                .unwrap()
        })
        .collect();
    let pre = |t: usize| -> Vec<usize> {
        (0..source.cones.len()).filter(|&s| assign[s] == t && source.dim(s) == target.dim(t)).collect()
    };
    let mut spaces: Vec<BTreeMap<i32, Vec<Vec<Rat>>>> = vec![BTreeMap::new(); target.cones.len()];
    let mut order: Vec<usize> = (0..target.cones.len()).collect();
    order.sort_by_key(|&t| target.dim(t));
    for t in order {
        let sources = pre(t);
        let mut interior: Vec<usize> = sources.iter().flat_map(|s| source.cones[*s].facets.clone()).filter(|f| assign[*f] == t).collect();
        interior.sort();
        interior.dedup();
        for d in min..=max {
            let x_len: usize = sources.iter().map(|s| k.dim_at(*s, d)).sum();
            // rows: interior equations, then for each facet of t: D x - B y
            let mut rows: Vec<Vec<Rat>> = k.block(&sources, &interior, d);
            let y_total: usize = target.cones[t].facets.iter().map(|f| spaces[*f][&d].len()).sum();
            for r in rows.iter_mut() {
                r.extend(vec![Rat::zero(); y_total]);
            }
            let mut y_off = x_len;
            for &f in &target.cones[t].facets {
                let over = pre(f);
                let b = &spaces[f][&d];
                let dx = k.block(&sources, &over, d);
                for (i, row) in dx.into_iter().enumerate() {
                    let mut full = row;
                    full.extend(vec![Rat::zero(); y_total]);
                    for (j, bv) in b.iter().enumerate() {
                        full[y_off + j] = bv[i].neg();
                    }
                    rows.push(full);
                }
                y_off += b.len();
            }
            let kernel = if rows.is_empty() {
                (0..x_len + y_total).map(|i| (0..x_len + y_total).map(|j| Rat::int((i == j) as i128)).collect()).collect()
            } else {
                nullspace(&rows, x_len + y_total)
            };
            let projected: Vec<Vec<Rat>> = kernel.iter().map(|v| v[..x_len].to_vec()).collect();
            let basis = reduce(projected);
            spaces[t].insert(d, basis);
        }
    }
    spaces.iter().map(|s| s.iter().map(|(d, b)| (*d, b.len())).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projective_line_by_hand() {
        let fan = BFan::new(1, &[vec![1], vec![-1]], &[vec![0], vec![1]]);
        let k = minimal_complex(&fan, -1, 5);
        assert_eq!(k.comps[1].gens, vec![-1]);
        let h = cohomology(&k, -1, 5);
        // global sections: 1, then two in every higher even degree
        assert_eq!(h[&(-1, -1)], 1);
        assert_eq!(h[&(-1, 1)], 2);
        assert_eq!(h[&(0, -1)], 0);
    }
}
