//! Two-dimensional T-meshes in index space.
//!
//! A mesh is described in two layers. [`TMeshLayout`] is the user-facing
//! positive-area tiling over tables of distinct breakpoints, with optional
//! multiplicities of interior segments. [`TMesh`] is the expanded index-space
//! mesh for a given degree pair: each repeated line has its own index, the
//! boundary lines are repeated `floor(p/2) + 1` times, and unit segments are
//! stored as booleans.

use std::collections::{BTreeSet, HashSet};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::univariate::{knot_strings, knot_to_f64, Knot, LocalKnotVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// A line of constant `x` (vertical).
    X,
    /// A line of constant `y` (horizontal).
    Y,
}

/// Multiplicity of a stretch of an interior line, in breakpoint indices:
/// for `axis = x` the line `x = xs[line]` between `ys[from]` and `ys[to]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentMultiplicity {
    pub axis: Axis,
    pub line: usize,
    pub from: usize,
    pub to: usize,
    pub multiplicity: usize,
}

/// Positive-area rectangular tiling of the unit square.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TMeshLayout {
    #[serde(with = "knot_strings")]
    pub xs: Vec<Knot>,
    #[serde(with = "knot_strings")]
    pub ys: Vec<Knot>,
    /// Faces `[i0, j0, i1, j1]` spanning `[xs[i0], xs[i1]] x [ys[j0], ys[j1]]`.
    pub faces: Vec<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multiplicities: Vec<SegmentMultiplicity>,
}

/// Rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x0: Knot,
    pub x1: Knot,
    pub y0: Knot,
    pub y1: Knot,
}

impl Rect {
    pub fn new(x0: Knot, x1: Knot, y0: Knot, y1: Knot) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> Knot {
        self.x1 - self.x0
    }

    pub fn height(&self) -> Knot {
        self.y1 - self.y0
    }
}

/// Editable set of faces in coordinates; converted to a layout for use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tiling {
    pub faces: Vec<Rect>,
}

impl Tiling {
    pub fn tensor(xs: &[Knot], ys: &[Knot]) -> Self {
        let mut faces = Vec::new();
        for wy in ys.windows(2) {
            for wx in xs.windows(2) {
                faces.push(Rect::new(wx[0], wx[1], wy[0], wy[1]));
            }
        }
        Tiling { faces }
    }

    pub fn uniform(nx: usize, ny: usize) -> Self {
        let xs: Vec<Knot> = (0..=nx).map(|i| Knot::new(i as i64, nx as i64)).collect();
        let ys: Vec<Knot> = (0..=ny).map(|i| Knot::new(i as i64, ny as i64)).collect();
        Self::tensor(&xs, &ys)
    }

    /// Splits every face selected by `pred` into four.
    pub fn subdivide(&mut self, pred: impl Fn(&Rect) -> bool) {
        let two = Knot::from_integer(2);
        let mut out = Vec::with_capacity(self.faces.len());
        for f in &self.faces {
            if pred(f) {
                let xm = (f.x0 + f.x1) / two;
                let ym = (f.y0 + f.y1) / two;
                out.push(Rect::new(f.x0, xm, f.y0, ym));
                out.push(Rect::new(xm, f.x1, f.y0, ym));
                out.push(Rect::new(f.x0, xm, ym, f.y1));
                out.push(Rect::new(xm, f.x1, ym, f.y1));
            } else {
                out.push(*f);
            }
        }
        self.faces = out;
    }

    /// Adds the segment `axis = at` between `from` and `to`, splitting the
    /// faces it crosses. The segment must end on existing lines.
    pub fn add_segment(&mut self, axis: Axis, at: Knot, from: Knot, to: Knot) {
        let mut out = Vec::with_capacity(self.faces.len() + 4);
        for f in &self.faces {
            match axis {
                Axis::Y if f.y0 < at && at < f.y1 && from <= f.x0 && f.x1 <= to => {
                    out.push(Rect::new(f.x0, f.x1, f.y0, at));
                    out.push(Rect::new(f.x0, f.x1, at, f.y1));
                }
                Axis::X if f.x0 < at && at < f.x1 && from <= f.y0 && f.y1 <= to => {
                    out.push(Rect::new(f.x0, at, f.y0, f.y1));
                    out.push(Rect::new(at, f.x1, f.y0, f.y1));
                }
                _ => out.push(*f),
            }
        }
        self.faces = out;
    }

    /// Transposed tiling.
    pub fn transposed(&self) -> Tiling {
        Tiling { faces: self.faces.iter().map(|f| Rect::new(f.y0, f.y1, f.x0, f.x1)).collect() }
    }

    pub fn layout(&self) -> TMeshLayout {
        let xs: BTreeSet<Knot> = self.faces.iter().flat_map(|f| [f.x0, f.x1]).collect();
        let ys: BTreeSet<Knot> = self.faces.iter().flat_map(|f| [f.y0, f.y1]).collect();
        let xs: Vec<Knot> = xs.into_iter().collect();
        let ys: Vec<Knot> = ys.into_iter().collect();
        let ix = |v: Knot| xs.binary_search(&v).unwrap();
        let iy = |v: Knot| ys.binary_search(&v).unwrap();
        let mut faces: Vec<[usize; 4]> =
            self.faces.iter().map(|f| [ix(f.x0), iy(f.y0), ix(f.x1), iy(f.y1)]).collect();
        faces.sort_by_key(|f| (f[1], f[0]));
        TMeshLayout { xs, ys, faces, multiplicities: vec![] }
    }
}

impl TMeshLayout {
    pub fn tiling(&self) -> Tiling {
        Tiling {
            faces: self
                .faces
                .iter()
                .map(|f| Rect::new(self.xs[f[0]], self.xs[f[2]], self.ys[f[1]], self.ys[f[3]]))
                .collect(),
        }
    }

    /// Checks breakpoint tables and that the faces tile the square.
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("xs", &self.xs), ("ys", &self.ys)] {
            if t.len() < 2 || t[0] != Knot::zero() || *t.last().unwrap() != Knot::one() {
                return Err(Error::InvalidMesh(format!("{name} must run from 0 to 1")));
            }
            if t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMesh(format!("{name} must be strictly increasing")));
            }
        }
        let (nx, ny) = (self.xs.len() - 1, self.ys.len() - 1);
        let mut owner = vec![usize::MAX; nx * ny];
        for (k, f) in self.faces.iter().enumerate() {
            let [i0, j0, i1, j1] = *f;
            if i1 > nx || j1 > ny {
                return Err(Error::InvalidMesh(format!("face {k} has an off-grid vertex")));
            }
            if i0 >= i1 || j0 >= j1 {
                return Err(Error::InvalidMesh(format!("face {k} has no area")));
            }
            for j in j0..j1 {
                for i in i0..i1 {
                    if owner[j * nx + i] != usize::MAX {
                        return Err(Error::InvalidMesh(format!(
                            "faces {} and {k} overlap",
                            owner[j * nx + i]
                        )));
                    }
                    owner[j * nx + i] = k;
                }
            }
        }
        if let Some(c) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::InvalidMesh(format!(
                "gap at cell ({}, {}) of the breakpoint grid",
                c % nx,
                c / nx
            )));
        }
        for m in &self.multiplicities {
            let (lines, along) = match m.axis {
                Axis::X => (self.xs.len(), self.ys.len()),
                Axis::Y => (self.ys.len(), self.xs.len()),
            };
            if m.line == 0 || m.line + 1 >= lines || m.from >= m.to || m.to >= along {
                return Err(Error::InvalidMesh(format!(
                    "multiplicity entry {m:?} is not an interior segment"
                )));
            }
            if m.multiplicity == 0 {
                return Err(Error::InvalidMesh("zero multiplicity".into()));
            }
        }
        Ok(())
    }

    /// Multiplicities of the distinct unit segments: `v[k][c]` for the
    /// vertical line `xs[k]` over `[ys[c], ys[c+1]]`, `h[l][a]` likewise.
    fn distinct_segments(&self, bx: usize, by: usize) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
        let (kx, ky) = (self.xs.len(), self.ys.len());
        let mut v = vec![vec![0usize; ky - 1]; kx];
        let mut h = vec![vec![0usize; kx - 1]; ky];
        for f in &self.faces {
            let [i0, j0, i1, j1] = *f;
            for c in j0..j1 {
                v[i0][c] = 1;
                v[i1][c] = 1;
            }
            for a in i0..i1 {
                h[j0][a] = 1;
                h[j1][a] = 1;
            }
        }
        for c in 0..ky - 1 {
            v[0][c] = bx;
            v[kx - 1][c] = bx;
        }
        for a in 0..kx - 1 {
            h[0][a] = by;
            h[ky - 1][a] = by;
        }
        for m in &self.multiplicities {
            let table = match m.axis {
                Axis::X => &mut v,
                Axis::Y => &mut h,
            };
            for seg in m.from..m.to {
                if table[m.line][seg] == 0 {
                    return Err(Error::InvalidMesh(format!(
                        "multiplicity given for a missing segment {m:?}"
                    )));
                }
                table[m.line][seg] = m.multiplicity;
            }
        }
        for (k, row) in v.iter().enumerate() {
            if row.iter().all(|&m| m == 0) {
                return Err(Error::InvalidMesh(format!("breakpoint xs[{k}] is not used")));
            }
        }
        for (l, row) in h.iter().enumerate() {
            if row.iter().all(|&m| m == 0) {
                return Err(Error::InvalidMesh(format!("breakpoint ys[{l}] is not used")));
            }
        }
        Ok((v, h))
    }
}

/// Horizontal or vertical orientation of a T-junction or extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// An interior vertex with exactly three incident edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TJunction {
    pub vertex: [usize; 2],
    /// Horizontal when the missing edge is horizontal.
    pub orientation: Orientation,
    /// `+1` if the missing edge points towards increasing index.
    pub missing: i8,
}

/// T-junction extension as closed index intervals on the junction's line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Extension {
    pub junction: TJunction,
    /// Index of the line the extension lies on (row for horizontal ones).
    pub line: usize,
    pub face: [usize; 2],
    pub edge: [usize; 2],
}

impl Extension {
    pub fn span(&self) -> [usize; 2] {
        [self.face[0].min(self.edge[0]), self.face[1].max(self.edge[1])]
    }

    fn meets(&self, other: &Extension) -> bool {
        let a = self.span();
        let b = other.span();
        match (self.junction.orientation, other.junction.orientation) {
            (Orientation::Horizontal, Orientation::Horizontal)
            | (Orientation::Vertical, Orientation::Vertical) => {
                self.line == other.line && a[0] <= b[1] && b[0] <= a[1]
            }
            _ => a[0] <= other.line && other.line <= a[1] && b[0] <= self.line && self.line <= b[1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TMeshCensus {
    pub faces: usize,
    pub zero_measure_faces: usize,
    pub horizontal_edges: usize,
    pub vertical_edges: usize,
    pub vertices: usize,
    pub boundary_vertices: usize,
    pub boundary_horizontal_edges: usize,
    pub boundary_vertical_edges: usize,
    pub horizontal_t_junctions: usize,
    pub vertical_t_junctions: usize,
    pub euler_characteristic: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Suitability {
    pub analysis_suitable: bool,
    /// No two extensions meet and none crosses an interior repeated line.
    pub strongly_suitable: bool,
    /// Pairs of intersecting horizontal and vertical extensions.
    pub crossings: Vec<[usize; 2]>,
}

/// Expanded index-space T-mesh for a degree pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TMesh {
    pub degrees: [usize; 2],
    xv: Vec<Knot>,
    yv: Vec<Knot>,
    /// `vseg[i * (ny - 1) + r]`: vertical line `i` between rows `r` and `r+1`.
    vseg: Vec<bool>,
    /// `hseg[j * (nx - 1) + i]`: horizontal line `j` between columns `i`, `i+1`.
    hseg: Vec<bool>,
}

impl TMesh {
    /// Expands a layout, repeating the boundary lines `floor(p/2) + 1` times.
    pub fn from_layout(layout: &TMeshLayout, degrees: [usize; 2]) -> Result<TMesh> {
        layout.validate()?;
        let bx = degrees[0] / 2 + 1;
        let by = degrees[1] / 2 + 1;
        let (vd, hd) = layout.distinct_segments(bx, by)?;
        let (kx, ky) = (layout.xs.len(), layout.ys.len());
        let gx: Vec<usize> = vd.iter().map(|r| *r.iter().max().unwrap()).collect();
        let gy: Vec<usize> = hd.iter().map(|r| *r.iter().max().unwrap()).collect();
        let starts = |g: &[usize]| {
            let mut s = vec![0];
            for &m in g {
                s.push(s.last().unwrap() + m);
            }
            s
        };
        let sx = starts(&gx);
        let sy = starts(&gy);
        let (nx, ny) = (sx[kx], sy[ky]);
        let mut xv = Vec::with_capacity(nx);
        for k in 0..kx {
            xv.extend(std::iter::repeat(layout.xs[k]).take(gx[k]));
        }
        let mut yv = Vec::with_capacity(ny);
        for l in 0..ky {
            yv.extend(std::iter::repeat(layout.ys[l]).take(gy[l]));
        }
        // multiplicity of the perpendicular line met at a point, as the max
        // over the two distinct segments adjacent to it
        let at = |t: &Vec<Vec<usize>>, line: usize, pos: usize| -> usize {
            let row = &t[line];
            let a = if pos > 0 { row[pos - 1] } else { 0 };
            let b = if pos < row.len() { row[pos] } else { 0 };
            a.max(b)
        };
        let mut mesh = TMesh {
            degrees,
            xv,
            yv,
            vseg: vec![false; nx * (ny - 1)],
            hseg: vec![false; ny * (nx - 1)],
        };
        for k in 0..kx {
            for c in 0..ky - 1 {
                for q in 0..vd[k][c] {
                    let i = sx[k] + q;
                    let lo = sy[c];
                    let hi = if c + 2 < ky && vd[k][c + 1] > q {
                        sy[c + 1] + gy[c + 1] - 1
                    } else {
                        sy[c + 1] + at(&hd, c + 1, k).max(1) - 1
                    };
                    for r in lo..hi {
                        mesh.vseg[i * (ny - 1) + r] = true;
                    }
                }
            }
        }
        for l in 0..ky {
            for a in 0..kx - 1 {
                for q in 0..hd[l][a] {
                    let j = sy[l] + q;
                    let lo = sx[a];
                    let hi = if a + 2 < kx && hd[l][a + 1] > q {
                        sx[a + 1] + gx[a + 1] - 1
                    } else {
                        sx[a + 1] + at(&vd, a + 1, l).max(1) - 1
                    };
                    for i in lo..hi {
                        mesh.hseg[j * (nx - 1) + i] = true;
                    }
                }
            }
        }
        mesh.check()?;
        Ok(mesh)
    }

    pub fn nx(&self) -> usize {
        self.xv.len()
    }

    pub fn ny(&self) -> usize {
        self.yv.len()
    }

    pub fn x(&self, i: usize) -> Knot {
        self.xv[i]
    }

    pub fn y(&self, j: usize) -> Knot {
        self.yv[j]
    }

    pub fn has_v(&self, i: usize, r: usize) -> bool {
        r + 1 < self.ny() && self.vseg[i * (self.ny() - 1) + r]
    }

    pub fn has_h(&self, j: usize, i: usize) -> bool {
        i + 1 < self.nx() && self.hseg[j * (self.nx() - 1) + i]
    }

    fn set_v(&mut self, i: usize, r: usize) {
        let ny = self.ny();
        self.vseg[i * (ny - 1) + r] = true;
    }

    fn set_h(&mut self, j: usize, i: usize) {
        let nx = self.nx();
        self.hseg[j * (nx - 1) + i] = true;
    }

    /// Vertical line `i` passes through or ends at row `j`.
    pub fn touch_v(&self, i: usize, j: usize) -> bool {
        self.has_v(i, j) || (j > 0 && self.has_v(i, j - 1))
    }

    pub fn touch_h(&self, j: usize, i: usize) -> bool {
        self.has_h(j, i) || (i > 0 && self.has_h(j, i - 1))
    }

    pub fn is_vertex(&self, i: usize, j: usize) -> bool {
        self.touch_v(i, j) && self.touch_h(j, i)
    }

    pub fn vertices(&self) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                if self.is_vertex(i, j) {
                    out.push([i, j]);
                }
            }
        }
        out
    }

    /// Horizontal edges `(i0, i1, j)` between consecutive vertices.
    pub fn horizontal_edges(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for j in 0..self.ny() {
            let mut prev: Option<usize> = None;
            for i in 0..self.nx() {
                if i > 0 && !self.has_h(j, i - 1) {
                    prev = None;
                }
                if self.is_vertex(i, j) {
                    if let Some(a) = prev {
                        out.push([a, i, j]);
                    }
                    prev = Some(i);
                }
            }
        }
        out
    }

    /// Vertical edges `(i, j0, j1)` between consecutive vertices.
    pub fn vertical_edges(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for i in 0..self.nx() {
            let mut prev: Option<usize> = None;
            for j in 0..self.ny() {
                if j > 0 && !self.has_v(i, j - 1) {
                    prev = None;
                }
                if self.is_vertex(i, j) {
                    if let Some(a) = prev {
                        out.push([i, a, j]);
                    }
                    prev = Some(j);
                }
            }
        }
        out.sort_by_key(|e| (e[1], e[0]));
        out
    }

    /// Faces `[i0, j0, i1, j1]` in index space, including zero-measure ones,
    /// ordered by `(j0, i0)`.
    pub fn faces(&self) -> Result<Vec<[usize; 4]>> {
        let (cx, cy) = (self.nx() - 1, self.ny() - 1);
        let mut comp = vec![usize::MAX; cx * cy];
        let mut faces = Vec::new();
        for start in 0..cx * cy {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = faces.len();
            comp[start] = id;
            let mut stack = vec![start];
            let (mut i0, mut j0, mut i1, mut j1) = (usize::MAX, usize::MAX, 0, 0);
            let mut count = 0;
            while let Some(c) = stack.pop() {
                let (i, j) = (c % cx, c / cx);
                count += 1;
                i0 = i0.min(i);
                j0 = j0.min(j);
                i1 = i1.max(i + 1);
                j1 = j1.max(j + 1);
                let mut nb = Vec::with_capacity(4);
                if i + 1 < cx && !self.has_v(i + 1, j) {
                    nb.push(c + 1);
                }
                if i > 0 && !self.has_v(i, j) {
                    nb.push(c - 1);
                }
                if j + 1 < cy && !self.has_h(j + 1, i) {
                    nb.push(c + cx);
                }
                if j > 0 && !self.has_h(j, i) {
                    nb.push(c - cx);
                }
                for n in nb {
                    if comp[n] == usize::MAX {
                        comp[n] = id;
                        stack.push(n);
                    }
                }
            }
            if count != (i1 - i0) * (j1 - j0) {
                return Err(Error::InvalidMesh(format!(
                    "region around cell ({}, {}) is not a rectangle",
                    start % cx,
                    start / cx
                )));
            }
            faces.push([i0, j0, i1, j1]);
        }
        // no dangling segment inside a face
        for f in &faces {
            for j in f[1]..f[3] {
                for i in f[0] + 1..f[2] {
                    if self.has_v(i, j) {
                        return Err(Error::InvalidMesh(format!("dangling segment inside face {f:?}")));
                    }
                }
            }
            for j in f[1] + 1..f[3] {
                for i in f[0]..f[2] {
                    if self.has_h(j, i) {
                        return Err(Error::InvalidMesh(format!("dangling segment inside face {f:?}")));
                    }
                }
            }
        }
        faces.sort_by_key(|f| (f[1], f[0]));
        Ok(faces)
    }

    fn check(&self) -> Result<()> {
        let (nx, ny) = (self.nx(), self.ny());
        for r in 0..ny - 1 {
            if !self.has_v(0, r) || !self.has_v(nx - 1, r) {
                return Err(Error::InvalidMesh("boundary is not closed".into()));
            }
        }
        for i in 0..nx - 1 {
            if !self.has_h(0, i) || !self.has_h(ny - 1, i) {
                return Err(Error::InvalidMesh("boundary is not closed".into()));
            }
        }
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                if !self.is_vertex(i, j) {
                    continue;
                }
                let up = self.has_v(i, j);
                let down = self.has_v(i, j - 1);
                let right = self.has_h(j, i);
                let left = self.has_h(j, i - 1);
                if (up ^ down) && (left ^ right) {
                    return Err(Error::InvalidMesh(format!("L-shaped vertex at ({i}, {j})")));
                }
            }
        }
        self.faces().map(|_| ())
    }

    pub fn t_junctions(&self) -> Vec<TJunction> {
        let mut out = Vec::new();
        for j in 1..self.ny() - 1 {
            for i in 1..self.nx() - 1 {
                if !self.is_vertex(i, j) {
                    continue;
                }
                let up = self.has_v(i, j);
                let down = self.has_v(i, j - 1);
                let right = self.has_h(j, i);
                let left = self.has_h(j, i - 1);
                let n = [up, down, right, left].iter().filter(|&&b| b).count();
                if n != 3 {
                    continue;
                }
                let (orientation, missing) = if !right {
                    (Orientation::Horizontal, 1)
                } else if !left {
                    (Orientation::Horizontal, -1)
                } else if !up {
                    (Orientation::Vertical, 1)
                } else {
                    (Orientation::Vertical, -1)
                };
                out.push(TJunction { vertex: [i, j], orientation, missing });
            }
        }
        out
    }

    pub fn census(&self) -> Result<TMeshCensus> {
        let faces = self.faces()?;
        let zero = faces
            .iter()
            .filter(|f| self.xv[f[0]] == self.xv[f[2]] || self.yv[f[1]] == self.yv[f[3]])
            .count();
        let verts = self.vertices();
        let (nx, ny) = (self.nx(), self.ny());
        let on_boundary = |i: usize, j: usize| i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
        let he = self.horizontal_edges();
        let ve = self.vertical_edges();
        let tj = self.t_junctions();
        let th = tj.iter().filter(|t| t.orientation == Orientation::Horizontal).count();
        Ok(TMeshCensus {
            faces: faces.len(),
            zero_measure_faces: zero,
            horizontal_edges: he.len(),
            vertical_edges: ve.len(),
            vertices: verts.len(),
            boundary_vertices: verts.iter().filter(|v| on_boundary(v[0], v[1])).count(),
            boundary_horizontal_edges: he.iter().filter(|e| e[2] == 0 || e[2] == ny - 1).count(),
            boundary_vertical_edges: ve.iter().filter(|e| e[0] == 0 || e[0] == nx - 1).count(),
            horizontal_t_junctions: th,
            vertical_t_junctions: tj.len() - th,
            euler_characteristic: verts.len() as i64 - (he.len() + ve.len()) as i64 + faces.len() as i64,
        })
    }

    /// Walks from `start` along a line, stopping at the `count`-th
    /// perpendicular line met or at the boundary.
    fn walk(&self, orientation: Orientation, line: usize, start: usize, step: i64, count: usize) -> usize {
        let n = match orientation {
            Orientation::Horizontal => self.nx(),
            Orientation::Vertical => self.ny(),
        };
        let mut pos = start;
        let mut met = 0;
        while met < count {
            if (step < 0 && pos == 0) || (step > 0 && pos == n - 1) {
                break;
            }
            pos = (pos as i64 + step) as usize;
            let hit = match orientation {
                Orientation::Horizontal => self.touch_v(pos, line),
                Orientation::Vertical => self.touch_h(pos, line),
            };
            if hit {
                met += 1;
            }
        }
        pos
    }

    pub fn extensions(&self) -> Vec<Extension> {
        self.t_junctions()
            .into_iter()
            .map(|t| {
                let (line, start, p) = match t.orientation {
                    Orientation::Horizontal => (t.vertex[1], t.vertex[0], self.degrees[0]),
                    Orientation::Vertical => (t.vertex[0], t.vertex[1], self.degrees[1]),
                };
                let dir = t.missing as i64;
                let f = self.walk(t.orientation, line, start, dir, (p + 1) / 2);
                let e = self.walk(t.orientation, line, start, -dir, p / 2);
                Extension {
                    line,
                    face: [start.min(f), start.max(f)],
                    edge: [start.min(e), start.max(e)],
                    junction: t,
                }
            })
            .collect()
    }

    fn interior_repeated_crossing(&self, e: &Extension) -> bool {
        let s = e.span();
        match e.junction.orientation {
            Orientation::Horizontal => (s[0]..=s[1]).any(|i| {
                let x = self.xv[i];
                x > Knot::zero()
                    && x < Knot::one()
                    && self.touch_v(i, e.line)
                    && self.xv.iter().enumerate().any(|(k, &v)| k != i && v == x && self.touch_v(k, e.line))
            }),
            Orientation::Vertical => (s[0]..=s[1]).any(|j| {
                let y = self.yv[j];
                y > Knot::zero()
                    && y < Knot::one()
                    && self.touch_h(j, e.line)
                    && self.yv.iter().enumerate().any(|(k, &v)| k != j && v == y && self.touch_h(k, e.line))
            }),
        }
    }

    pub fn suitability(&self) -> Suitability {
        let ext = self.extensions();
        let mut crossings = Vec::new();
        let mut strong = true;
        for a in 0..ext.len() {
            for b in a + 1..ext.len() {
                if ext[a].meets(&ext[b]) {
                    strong = false;
                    if ext[a].junction.orientation != ext[b].junction.orientation {
                        crossings.push([a, b]);
                    }
                }
            }
            if self.interior_repeated_crossing(&ext[a]) {
                strong = false;
            }
        }
        Suitability { analysis_suitable: crossings.is_empty(), strongly_suitable: strong, crossings }
    }

    fn add_extension_segment(&mut self, orientation: Orientation, line: usize, span: [usize; 2]) {
        for k in span[0]..span[1] {
            match orientation {
                Orientation::Horizontal => self.set_h(line, k),
                Orientation::Vertical => self.set_v(line, k),
            }
        }
    }

    /// Mesh with all T-junction extensions added as lines.
    pub fn extended(&self) -> TMesh {
        let mut m = self.clone();
        for e in self.extensions() {
            m.add_extension_segment(e.junction.orientation, e.line, e.span());
        }
        m
    }

    /// Positive-area faces of the mesh in coordinates, sorted.
    pub fn bezier_faces(&self) -> Result<Vec<Rect>> {
        let mut out: Vec<Rect> = self
            .faces()?
            .into_iter()
            .map(|f| Rect::new(self.xv[f[0]], self.xv[f[2]], self.yv[f[1]], self.yv[f[3]]))
            .filter(|r| r.width() > Knot::zero() && r.height() > Knot::zero())
            .collect();
        out.sort();
        Ok(out)
    }

    /// Coordinate tiling of the positive-area faces.
    pub fn tiling(&self) -> Result<Tiling> {
        Ok(Tiling { faces: self.bezier_faces()? })
    }

    /// Anchors in doubled index coordinates, ordered by row then column.
    pub fn anchors(&self) -> Result<Vec<[usize; 2]>> {
        let [p1, p2] = self.degrees;
        let mut out: Vec<[usize; 2]> = match (p1 % 2, p2 % 2) {
            (1, 1) => self.vertices().into_iter().map(|[i, j]| [2 * i, 2 * j]).collect(),
            (0, 0) => self.faces()?.into_iter().map(|f| [f[0] + f[2], f[1] + f[3]]).collect(),
            (0, 1) => self.horizontal_edges().into_iter().map(|[a, b, j]| [a + b, 2 * j]).collect(),
            _ => self.vertical_edges().into_iter().map(|[i, a, b]| [2 * i, a + b]).collect(),
        };
        out.sort_by_key(|a| (a[1], a[0]));
        Ok(out)
    }

    /// Whether the vertical line `i` meets the horizontal ray at doubled
    /// height `y2`.
    fn ray_hits_v(&self, i: usize, y2: usize) -> bool {
        if y2 % 2 == 0 {
            self.touch_v(i, y2 / 2)
        } else {
            self.has_v(i, (y2 - 1) / 2)
        }
    }

    fn ray_hits_h(&self, j: usize, x2: usize) -> bool {
        if x2 % 2 == 0 {
            self.touch_h(j, x2 / 2)
        } else {
            self.has_h(j, (x2 - 1) / 2)
        }
    }

    fn ray_knots(&self, p: usize, pos2: usize, n: usize, hits: impl Fn(usize) -> bool, val: &[Knot]) -> LocalKnotVector {
        let count = if p % 2 == 1 { (p + 1) / 2 } else { (p + 2) / 2 };
        let mut left = Vec::with_capacity(count);
        if pos2 > 0 {
            let mut i = (pos2 - 1) / 2;
            loop {
                if hits(i) {
                    left.push(val[i]);
                    if left.len() == count {
                        break;
                    }
                }
                if i == 0 {
                    break;
                }
                i -= 1;
            }
        }
        while left.len() < count {
            left.push(Knot::zero());
        }
        let mut right = Vec::with_capacity(count);
        let mut i = pos2 / 2 + 1;
        while i < n && right.len() < count {
            if hits(i) {
                right.push(val[i]);
            }
            i += 1;
        }
        while right.len() < count {
            right.push(Knot::one());
        }
        let mut knots: Vec<Knot> = left.into_iter().rev().collect();
        if p % 2 == 1 {
            knots.push(val[pos2 / 2]);
        }
        knots.extend(right);
        LocalKnotVector::new(knots)
    }

    /// Local knot vectors of the anchor by ray tracing in index space.
    pub fn local_knots(&self, anchor: [usize; 2]) -> [LocalKnotVector; 2] {
        let [ax, ay] = anchor;
        let kx = self.ray_knots(self.degrees[0], ax, self.nx(), |i| self.ray_hits_v(i, ay), &self.xv);
        let ky = self.ray_knots(self.degrees[1], ay, self.ny(), |j| self.ray_hits_h(j, ax), &self.yv);
        [kx, ky]
    }

    /// Same mesh read with another degree pair.
    pub fn with_degrees(&self, degrees: [usize; 2]) -> TMesh {
        TMesh { degrees, ..self.clone() }
    }

    /// Adds the one-bay face extension of every T-junction of the given
    /// orientation.
    pub fn with_first_bay(&self, orientation: Orientation) -> TMesh {
        let mut m = self.clone();
        for t in self.t_junctions() {
            if t.orientation != orientation {
                continue;
            }
            let (line, start) = match orientation {
                Orientation::Horizontal => (t.vertex[1], t.vertex[0]),
                Orientation::Vertical => (t.vertex[0], t.vertex[1]),
            };
            let end = self.walk(orientation, line, start, t.missing as i64, 1);
            m.add_extension_segment(orientation, line, [start.min(end), start.max(end)]);
        }
        m
    }

    /// Removes the outermost index-space line on both sides of the given
    /// axis (`Axis::X` removes the first and last vertical lines).
    pub fn strip_boundary(&self, axis: Axis) -> TMesh {
        let (nx, ny) = (self.nx(), self.ny());
        match axis {
            Axis::X => {
                let xv = self.xv[1..nx - 1].to_vec();
                let mut vseg = Vec::with_capacity((nx - 2) * (ny - 1));
                for i in 1..nx - 1 {
                    vseg.extend_from_slice(&self.vseg[i * (ny - 1)..(i + 1) * (ny - 1)]);
                }
                let mut hseg = Vec::with_capacity(ny * (nx - 3));
                for j in 0..ny {
                    hseg.extend_from_slice(&self.hseg[j * (nx - 1) + 1..j * (nx - 1) + nx - 2]);
                }
                TMesh { degrees: self.degrees, xv, yv: self.yv.clone(), vseg, hseg }
            }
            Axis::Y => {
                let t = self.transposed().strip_boundary(Axis::X);
                t.transposed()
            }
        }
    }

    pub fn transposed(&self) -> TMesh {
        let (nx, ny) = (self.nx(), self.ny());
        let mut vseg = vec![false; ny * (nx - 1)];
        let mut hseg = vec![false; nx * (ny - 1)];
        // new vertical lines are old horizontal ones
        for j in 0..ny {
            for i in 0..nx - 1 {
                vseg[j * (nx - 1) + i] = self.has_h(j, i);
            }
        }
        for i in 0..nx {
            for r in 0..ny - 1 {
                hseg[i * (ny - 1) + r] = self.has_v(i, r);
            }
        }
        TMesh {
            degrees: [self.degrees[1], self.degrees[0]],
            xv: self.yv.clone(),
            yv: self.xv.clone(),
            vseg,
            hseg,
        }
    }

    /// Unit segments present, as `(vertical, line, position)`.
    pub fn segment_set(&self) -> HashSet<(bool, usize, usize)> {
        let mut s = HashSet::new();
        for i in 0..self.nx() {
            for r in 0..self.ny() - 1 {
                if self.has_v(i, r) {
                    s.insert((true, i, r));
                }
            }
        }
        for j in 0..self.ny() {
            for i in 0..self.nx() - 1 {
                if self.has_h(j, i) {
                    s.insert((false, j, i));
                }
            }
        }
        s
    }

    pub fn x_values(&self) -> &[Knot] {
        &self.xv
    }

    pub fn y_values(&self) -> &[Knot] {
        &self.yv
    }

    /// Parametric point of a doubled index coordinate pair, averaging the two
    /// neighbouring lines for odd entries.
    pub fn anchor_point(&self, anchor: [usize; 2]) -> [f64; 2] {
        let c = |v: &[Knot], a: usize| {
            if a % 2 == 0 {
                knot_to_f64(v[a / 2])
            } else {
                0.5 * (knot_to_f64(v[(a - 1) / 2]) + knot_to_f64(v[(a + 1) / 2]))
            }
        };
        [c(&self.xv, anchor[0]), c(&self.yv, anchor[1])]
    }
}

/// Adds face extensions of offending T-junctions until the mesh is strongly
/// analysis-suitable. Works on the coordinate tiling so the result is again a
/// layout.
pub fn restore_suitability(tiling: &Tiling, degrees: [usize; 2], max_rounds: usize) -> Result<Tiling> {
    let mut t = tiling.clone();
    for _ in 0..max_rounds {
        let mesh = TMesh::from_layout(&t.layout(), degrees)?;
        let ext = mesh.extensions();
        let mut offending = vec![false; ext.len()];
        for a in 0..ext.len() {
            for b in a + 1..ext.len() {
                if ext[a].meets(&ext[b]) {
                    offending[a] = true;
                    offending[b] = true;
                }
            }
        }
        if !offending.iter().any(|&o| o) {
            return Ok(t);
        }
        for (e, _) in ext.iter().zip(&offending).filter(|(_, &o)| o) {
            let s = e.face;
            match e.junction.orientation {
                Orientation::Horizontal => {
                    let (a, b) = (mesh.x(s[0]), mesh.x(s[1]));
                    if a < b {
                        t.add_segment(Axis::Y, mesh.y(e.line), a, b);
                    }
                }
                Orientation::Vertical => {
                    let (a, b) = (mesh.y(s[0]), mesh.y(s[1]));
                    if a < b {
                        t.add_segment(Axis::X, mesh.x(e.line), a, b);
                    }
                }
            }
        }
    }
    Err(Error::NotAnalysisSuitable(format!(
        "extensions still meet after {max_rounds} rounds"
    )))
}
