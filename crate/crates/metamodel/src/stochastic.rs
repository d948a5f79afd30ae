//! Kernel density layer over 2-D feature points.
//!
//! Point datasets are smoothed into gridded densities with an isotropic
//! Gaussian kernel, thresholded into percentile support regions, and the
//! regions then behave like the member sets of the discrete layer: the
//! same 16-operation catalog combines them cellwise, and similarity
//! becomes a mass ratio under the union density instead of a count ratio.
//!
//! Defaults are deliberately loud. Bandwidth falls back to a Silverman
//! style rule, the grid pads the data bounding box by [`GRID_MARGIN_RADII`]
//! bandwidths, kernels truncate at [`KERNEL_TRUNCATION_RADII`] bandwidths,
//! and every report echoes the values in effect.

use crate::error::{Error, Result};
use crate::expr::op_apply;
use crate::framework::Framework;
use crate::sets::ElementId;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Kernels are cut off at this many bandwidths from their center.
pub const KERNEL_TRUNCATION_RADII: f64 = 4.0;
/// Grids pad the data bounding box by this many bandwidths per side.
pub const GRID_MARGIN_RADII: f64 = 3.0;
/// Cells where every class density falls below this fraction of the global
/// peak are left unlabeled by the decision map.
pub const BAYES_FLOOR_RATIO: f64 = 1e-12;
/// Smallest accepted grid resolution per axis.
pub const MIN_RESOLUTION: usize = 32;

/// Regular grid over a 2-D feature space. Sample coordinates run from the
/// extent minimum to the maximum inclusive, so the step along an axis is
/// `(max - min) / (resolution - 1)`. Cells are addressed as `(ix, iy)` and
/// flattened x-major: `flat = ix * resolution + iy`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureGrid {
    axes: [String; 2],
    extent: [[f64; 2]; 2],
    resolution: usize,
}

impl FeatureGrid {
    pub fn new(axes: [String; 2], extent: [[f64; 2]; 2], resolution: usize) -> Result<FeatureGrid> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::domain(format!(
                "grid resolution {resolution} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        for (axis, range) in extent.iter().enumerate() {
            if !range[0].is_finite() || !range[1].is_finite() || range[0] >= range[1] {
                return Err(Error::domain(format!(
                    "axis {axis} extent [{}, {}] is not a proper interval",
                    range[0], range[1]
                )));
            }
        }
        Ok(FeatureGrid {
            axes,
            extent,
            resolution,
        })
    }

    /// Grid whose extent is the bounding box of `points` padded by
    /// `margin` on every side.
    pub fn covering(
        axes: [String; 2],
        points: &[[f64; 2]],
        margin: f64,
        resolution: usize,
    ) -> Result<FeatureGrid> {
        if points.is_empty() {
            return Err(Error::domain("cannot fit a grid around zero points"));
        }
        let mut extent = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
        for p in points {
            for axis in 0..2 {
                extent[axis][0] = extent[axis][0].min(p[axis]);
                extent[axis][1] = extent[axis][1].max(p[axis]);
            }
        }
        for range in &mut extent {
            range[0] -= margin;
            range[1] += margin;
        }
        FeatureGrid::new(axes, extent, resolution)
    }

    pub fn axes(&self) -> &[String; 2] {
        &self.axes
    }

    pub fn extent(&self) -> &[[f64; 2]; 2] {
        &self.extent
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.extent[axis][1] - self.extent[axis][0]) / (self.resolution - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.step(0) * self.step(1)
    }

    /// Sample coordinate along an axis; the last sample is the extent
    /// maximum exactly.
    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        if index == self.resolution - 1 {
            self.extent[axis][1]
        } else {
            self.extent[axis][0] + index as f64 * self.step(axis)
        }
    }

    pub fn flat(&self, ix: usize, iy: usize) -> usize {
        ix * self.resolution + iy
    }

    pub fn unflat(&self, flat: usize) -> (usize, usize) {
        (flat / self.resolution, flat % self.resolution)
    }

    /// Cell whose sample coordinate is nearest to the point, clamped to
    /// the grid.
    pub fn nearest_cell(&self, point: [f64; 2]) -> (usize, usize) {
        let clamp = |axis: usize| -> usize {
            let raw = ((point[axis] - self.extent[axis][0]) / self.step(axis)).round();
            (raw.max(0.0) as usize).min(self.resolution - 1)
        };
        (clamp(0), clamp(1))
    }
}

/// Probability density sampled on a [`FeatureGrid`], normalized so the
/// cell sum times the cell area is one.
#[derive(Debug, Clone, Serialize)]
pub struct Density {
    grid: FeatureGrid,
    values: Vec<f64>,
}

impl Density {
    pub fn grid(&self) -> &FeatureGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.flat(ix, iy)]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Probability mass over the cells a mask selects.
    pub fn mass_within(&self, region: &SupportRegion) -> f64 {
        let area = self.grid.cell_area();
        self.values
            .iter()
            .zip(region.mask.iter())
            .filter(|(_, &m)| m)
            .map(|(v, _)| v * area)
            .sum()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Cell of the highest density value; earlier flat index wins ties.
    pub fn mode_cell(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.grid.unflat(best)
    }

    /// Grayscale PGM (P2). Rows run from high y to low y so the image is
    /// oriented like a plot; values scale the peak to 255.
    pub fn to_pgm(&self) -> String {
        let res = self.grid.resolution;
        let peak = self.peak();
        let mut out = format!("P2\n{res} {res}\n255\n");
        for iy in (0..res).rev() {
            let row: Vec<String> = (0..res)
                .map(|ix| {
                    let v = self.value(ix, iy);
                    let level = if peak > 0.0 {
                        (v / peak * 255.0).round() as u32
                    } else {
                        0
                    };
                    level.to_string()
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// One `x,y,density` row per cell, x-major.
    pub fn to_csv(&self) -> String {
        let res = self.grid.resolution;
        let mut out = String::from("x,y,density\n");
        for ix in 0..res {
            for iy in 0..res {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    self.grid.coordinate(0, ix),
                    self.grid.coordinate(1, iy),
                    self.value(ix, iy)
                );
            }
        }
        out
    }
}

/// Bandwidth from a Silverman style rule: per-axis population standard
/// deviation scaled by n^(-1/6), combined isotropically as the geometric
/// mean of the two axis values.
pub fn silverman_bandwidth(points: &[[f64; 2]]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::domain("bandwidth rule needs at least one point"));
    }
    let n = points.len() as f64;
    let mut sigma = 1.0;
    for axis in 0..2 {
        let mean = points.iter().map(|p| p[axis]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / n;
        sigma *= var.sqrt() * n.powf(-1.0 / 6.0);
    }
    let sigma = sigma.sqrt();
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(
            "point cloud is degenerate along an axis; pass an explicit bandwidth",
        ));
    }
    Ok(sigma)
}

/// Smooth points into a density: one isotropic Gaussian bump per point,
/// truncated at [`KERNEL_TRUNCATION_RADII`] bandwidths, renormalized to
/// unit mass on the grid.
pub fn kde(points: &[[f64; 2]], bandwidth: f64, grid: &FeatureGrid) -> Result<Density> {
    if points.is_empty() {
        return Err(Error::domain("kernel estimate needs at least one point"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::domain(format!(
            "bandwidth must be a positive real, got {bandwidth}"
        )));
    }
    let res = grid.resolution;
    let cutoff = KERNEL_TRUNCATION_RADII * bandwidth;
    let cutoff2 = cutoff * cutoff;
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut values = vec![0.0f64; grid.cell_count()];
    for p in points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::domain(format!(
                "point ({}, {}) is not finite",
                p[0], p[1]
            )));
        }
        // Index window around the truncation box, one cell of slack so the
        // exact radius test below is the only filter that matters.
        let window = |axis: usize| -> (usize, usize) {
            let step = grid.step(axis);
            let lo = ((p[axis] - cutoff - grid.extent[axis][0]) / step).floor() - 1.0;
            let hi = ((p[axis] + cutoff - grid.extent[axis][0]) / step).ceil() + 1.0;
            let lo = lo.max(0.0) as usize;
            let hi = (hi.max(0.0) as usize).min(res - 1);
            (lo, hi)
        };
        let (x0, x1) = window(0);
        let (y0, y1) = window(1);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for ix in x0..=x1 {
            let dx = grid.coordinate(0, ix) - p[0];
            for iy in y0..=y1 {
                let dy = grid.coordinate(1, iy) - p[1];
                let r2 = dx * dx + dy * dy;
                if r2 <= cutoff2 {
                    values[grid.flat(ix, iy)] += (-r2 * inv).exp();
                }
            }
        }
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain(
            "no point contributes any mass on the grid; extent and data do not overlap",
        ));
    }
    let scale = 1.0 / (total * grid.cell_area());
    for v in &mut values {
        *v *= scale;
    }
    Ok(Density {
        grid: grid.clone(),
        values,
    })
}

/// Boolean cell mask over a [`FeatureGrid`]. Percentile-built regions keep
/// the chi they were cut at and the density level of the last admitted
/// cell; masks produced by set operations carry neither.
#[derive(Debug, Clone, Serialize)]
pub struct SupportRegion {
    grid: FeatureGrid,
    mask: Vec<bool>,
    chi: Option<f64>,
    threshold: Option<f64>,
    last_cell: Option<usize>,
}

impl SupportRegion {
    pub fn grid(&self) -> &FeatureGrid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// The percentile the region was cut at, when it was built that way.
    pub fn chi(&self) -> Option<f64> {
        self.chi
    }

    /// Density level of the last cell the percentile rule admitted.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    /// Flat index of the last cell the percentile rule admitted.
    pub fn last_cell(&self) -> Option<usize> {
        self.last_cell
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn contains_cell(&self, ix: usize, iy: usize) -> bool {
        self.mask[self.grid.flat(ix, iy)]
    }

    /// Membership of a raw point: the mask value of its nearest cell.
    pub fn contains_point(&self, point: [f64; 2]) -> bool {
        let (ix, iy) = self.grid.nearest_cell(point);
        self.contains_cell(ix, iy)
    }

    pub fn complement(&self) -> SupportRegion {
        SupportRegion {
            grid: self.grid.clone(),
            mask: self.mask.iter().map(|&m| !m).collect(),
            chi: None,
            threshold: None,
            last_cell: None,
        }
    }

    pub fn same_cells(&self, other: &SupportRegion) -> bool {
        self.grid == other.grid && self.mask == other.mask
    }

    /// Bitmap PGM (P1), oriented like [`Density::to_pgm`].
    pub fn to_pgm(&self) -> String {
        let res = self.grid.resolution;
        let mut out = format!("P1\n{res} {res}\n");
        for iy in (0..res).rev() {
            let row: Vec<&str> = (0..res)
                .map(|ix| if self.contains_cell(ix, iy) { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Cut a density at the chi percentile: cells are admitted in order of
/// descending density (ties by ascending flat index) until their mass
/// reaches chi, never admitting zero-density cells.
pub fn support_region(d: &Density, chi: f64) -> Result<SupportRegion> {
    if !(chi > 0.0 && chi <= 1.0) {
        return Err(Error::domain(format!(
            "chi must lie in (0, 1], got {chi}"
        )));
    }
    let mut order: Vec<usize> = (0..d.values.len()).collect();
    // Stable sort: equal densities stay in ascending flat-index order.
    order.sort_by(|&a, &b| d.values[b].partial_cmp(&d.values[a]).unwrap());
    let area = d.grid.cell_area();
    let mut mask = vec![false; d.values.len()];
    let mut mass = 0.0;
    let mut last = None;
    for &cell in &order {
        let v = d.values[cell];
        if v <= 0.0 {
            break;
        }
        mask[cell] = true;
        mass += v * area;
        last = Some(cell);
        if mass >= chi {
            break;
        }
    }
    Ok(SupportRegion {
        grid: d.grid.clone(),
        mask,
        chi: Some(chi),
        threshold: last.map(|c| d.values[c]),
        last_cell: last,
    })
}

/// Combine two regions cellwise with one of the 16 catalog operations.
pub fn region_ops(a: &SupportRegion, b: &SupportRegion, op: u8) -> Result<SupportRegion> {
    if op >= 16 {
        return Err(Error::domain(format!("operation code {op} is out of range")));
    }
    if a.grid != b.grid {
        return Err(Error::domain(
            "support regions live on different grids and cannot be combined",
        ));
    }
    let mask = a
        .mask
        .iter()
        .zip(b.mask.iter())
        .map(|(&x, &y)| op_apply(op, x, y))
        .collect();
    Ok(SupportRegion {
        grid: a.grid.clone(),
        mask,
        chi: None,
        threshold: None,
        last_cell: None,
    })
}

/// Similarity of two regions under a shared density: the mass the density
/// puts on their intersection divided by the mass on their union.
pub fn stochastic_lambda(a: &SupportRegion, b: &SupportRegion, p: &Density) -> Result<f64> {
    if a.grid != b.grid || a.grid != p.grid {
        return Err(Error::domain(
            "regions and density must share one grid to be compared",
        ));
    }
    let mut inter = 0.0;
    let mut union = 0.0;
    for ((&x, &y), v) in a.mask.iter().zip(b.mask.iter()).zip(p.values.iter()) {
        if x && y {
            inter += v;
        }
        if x || y {
            union += v;
        }
    }
    if union == 0.0 {
        return Err(Error::domain(
            "the density puts no mass on either region; similarity is undefined",
        ));
    }
    Ok(inter / union)
}

/// Tuning for [`build_stochastic_framework`]. `bandwidth: None` selects
/// the Silverman rule over the union of all points.
#[derive(Debug, Clone)]
pub struct StochasticConfig {
    pub chi: f64,
    pub resolution: usize,
    pub bandwidth: Option<f64>,
}

impl Default for StochasticConfig {
    fn default() -> StochasticConfig {
        StochasticConfig {
            chi: 0.97,
            resolution: 256,
            bandwidth: None,
        }
    }
}

/// Point datasets smoothed onto one shared grid: per-dataset densities and
/// support regions plus the union density over every point (kept with
/// multiplicity) that the similarity measure integrates against.
#[derive(Debug, Clone)]
pub struct StochasticFramework {
    labels: Vec<String>,
    points: Vec<Vec<[f64; 2]>>,
    grid: FeatureGrid,
    bandwidth: f64,
    chi: f64,
    densities: Vec<Density>,
    regions: Vec<SupportRegion>,
    union_points: Vec<[f64; 2]>,
    union_density: Density,
}

pub fn build_stochastic_framework(
    axes: [String; 2],
    datasets: Vec<(String, Vec<[f64; 2]>)>,
    cfg: &StochasticConfig,
) -> Result<StochasticFramework> {
    if datasets.is_empty() {
        return Err(Error::domain("need at least one point dataset"));
    }
    let mut labels = Vec::new();
    let mut points = Vec::new();
    let mut union_points = Vec::new();
    for (label, pts) in datasets {
        if pts.is_empty() {
            return Err(Error::domain(format!("dataset `{label}` has no points")));
        }
        if labels.contains(&label) {
            return Err(Error::DuplicateId(label));
        }
        union_points.extend_from_slice(&pts);
        labels.push(label);
        points.push(pts);
    }
    let bandwidth = match cfg.bandwidth {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => {
            return Err(Error::domain(format!(
                "bandwidth must be a positive real, got {b}"
            )))
        }
        None => silverman_bandwidth(&union_points)?,
    };
    let grid = FeatureGrid::covering(
        axes,
        &union_points,
        GRID_MARGIN_RADII * bandwidth,
        cfg.resolution,
    )?;
    if !(cfg.chi > 0.0 && cfg.chi <= 1.0) {
        return Err(Error::domain(format!(
            "chi must lie in (0, 1], got {}",
            cfg.chi
        )));
    }
    let densities: Vec<Density> = points
        .iter()
        .map(|pts| kde(pts, bandwidth, &grid))
        .collect::<Result<_>>()?;
    let regions: Vec<SupportRegion> = densities
        .iter()
        .map(|d| support_region(d, cfg.chi))
        .collect::<Result<_>>()?;
    let union_density = kde(&union_points, bandwidth, &grid)?;
    Ok(StochasticFramework {
        labels,
        points,
        grid,
        bandwidth,
        chi: cfg.chi,
        densities,
        regions,
        union_points,
        union_density,
    })
}

impl StochasticFramework {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn grid(&self) -> &FeatureGrid {
        &self.grid
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownIdentifier(label.to_string()))
    }

    pub fn points(&self, label: &str) -> Result<&[[f64; 2]]> {
        Ok(&self.points[self.index_of(label)?])
    }

    pub fn density(&self, label: &str) -> Result<&Density> {
        Ok(&self.densities[self.index_of(label)?])
    }

    pub fn region(&self, label: &str) -> Result<&SupportRegion> {
        Ok(&self.regions[self.index_of(label)?])
    }

    pub fn union_points(&self) -> &[[f64; 2]] {
        &self.union_points
    }

    pub fn union_density(&self) -> &Density {
        &self.union_density
    }

    /// Pairwise similarity of two dataset regions under the union density.
    pub fn lambda_between(&self, a: &str, b: &str) -> Result<f64> {
        stochastic_lambda(
            &self.regions[self.index_of(a)?],
            &self.regions[self.index_of(b)?],
            &self.union_density,
        )
    }
}

/// Union density of the framework, the p every similarity integrates
/// against.
pub fn union_density(sfw: &StochasticFramework) -> &Density {
    sfw.union_density()
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipRow {
    pub label: String,
    /// New points whose nearest cell lies inside this dataset's region.
    pub individuals: usize,
    /// Percent of this dataset's density mass clipped by the new region.
    pub clipped_percent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionMatch {
    pub expr_text: String,
    pub lambda: f64,
    pub node_count: usize,
}

/// What a new point dataset looks like against the existing regions.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub bandwidth: f64,
    pub chi: f64,
    pub resolution: usize,
    /// The two counting rules in effect, spelled out so the numbers are
    /// unambiguous.
    pub definitions: [String; 2],
    pub rows: Vec<MembershipRow>,
    pub best: Option<RegionMatch>,
    pub candidates_evaluated: usize,
}

impl MembershipReport {
    pub fn overall_lambda(&self) -> f64 {
        self.best.as_ref().map(|b| b.lambda).unwrap_or(0.0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "membership report (bandwidth {}, chi {}, grid {}x{})",
            self.bandwidth, self.chi, self.resolution, self.resolution
        );
        for d in &self.definitions {
            let _ = writeln!(out, "  {d}");
        }
        for row in &self.rows {
            let _ = writeln!(
                out,
                "  {:<16} individuals {:>4}   clipped mass {:>7.2} %",
                row.label, row.individuals, row.clipped_percent
            );
        }
        match &self.best {
            Some(b) => {
                let _ = writeln!(
                    out,
                    "  best combination {} with lambda {:.4} ({} candidates)",
                    b.expr_text, b.lambda, self.candidates_evaluated
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "  no combination overlaps the new region ({} candidates)",
                    self.candidates_evaluated
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// The 14 region forms the combination search ranges over: each dataset
/// alone and complemented, then twelve two-region forms per unordered
/// pair. Mirrors the discrete candidate catalog.
fn region_candidates(sfw: &StochasticFramework) -> Vec<(String, usize, SupportRegion)> {
    let mut out = Vec::new();
    for (i, a) in sfw.labels.iter().enumerate() {
        out.push((a.clone(), 1, sfw.regions[i].clone()));
        out.push((format!("~{a}"), 2, sfw.regions[i].complement()));
    }
    let pair_forms: [(&str, u8, usize); 12] = [
        ("{a} & {b}", crate::expr::OP_AND, 3),
        ("~({a} & {b})", crate::expr::OP_NAND, 4),
        ("~{a} & {b}", crate::expr::OP_RDIFF, 4),
        ("{a} & ~{b}", crate::expr::OP_DIFF, 4),
        ("{a} | {b}", crate::expr::OP_OR, 3),
        ("~({a} | {b})", crate::expr::OP_NOR, 4),
        ("~{a} | {b}", crate::expr::OP_NOT_LEFT_OR_RIGHT, 4),
        ("{a} | ~{b}", crate::expr::OP_LEFT_OR_NOT_RIGHT, 4),
        ("{a} ^ {b}", crate::expr::OP_XOR, 3),
        ("~({a} ^ {b})", crate::expr::OP_XNOR, 4),
        ("{a} - {b}", crate::expr::OP_DIFF, 3),
        ("{b} - {a}", crate::expr::OP_RDIFF, 3),
    ];
    for i in 0..sfw.labels.len() {
        for j in (i + 1)..sfw.labels.len() {
            let (a, b) = (&sfw.labels[i], &sfw.labels[j]);
            for (pattern, op, nodes) in pair_forms {
                let text = pattern.replace("{a}", a).replace("{b}", b);
                let region = region_ops(&sfw.regions[i], &sfw.regions[j], op)
                    .expect("shared grid by construction");
                out.push((text, nodes, region));
            }
        }
    }
    out
}

/// Report how a new point dataset relates to the existing ones: per
/// dataset, the new points landing in its region and the share of its
/// density the new region clips, plus the best-matching region
/// combination under the union density.
pub fn membership_report(
    new_points: &[[f64; 2]],
    sfw: &StochasticFramework,
    chi: f64,
) -> Result<MembershipReport> {
    let new_density = kde(new_points, sfw.bandwidth, &sfw.grid)?;
    let new_region = support_region(&new_density, chi)?;
    let rows: Vec<MembershipRow> = sfw
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| MembershipRow {
            label: label.clone(),
            individuals: new_points
                .iter()
                .filter(|p| sfw.regions[i].contains_point(**p))
                .count(),
            clipped_percent: 100.0 * sfw.densities[i].mass_within(&new_region),
        })
        .collect();
    let candidates = region_candidates(sfw);
    let candidates_evaluated = candidates.len();
    let mut scored: Vec<RegionMatch> = candidates
        .into_iter()
        .filter_map(|(expr_text, node_count, region)| {
            let lambda = stochastic_lambda(&region, &new_region, &sfw.union_density).unwrap_or(0.0);
            (lambda > 0.0).then_some(RegionMatch {
                expr_text,
                lambda,
                node_count,
            })
        })
        .collect();
    scored.sort_by(|x, y| {
        y.lambda
            .partial_cmp(&x.lambda)
            .unwrap()
            .then(x.node_count.cmp(&y.node_count))
            .then(x.expr_text.cmp(&y.expr_text))
    });
    Ok(MembershipReport {
        bandwidth: sfw.bandwidth,
        chi,
        resolution: sfw.grid.resolution,
        definitions: [
            "individuals: count of new points whose nearest cell lies inside the \
             existing dataset's support region"
                .to_string(),
            "clipped mass: percent of the existing dataset's density mass falling \
             inside the new dataset's support region"
                .to_string(),
        ],
        rows,
        best: scored.into_iter().next(),
        candidates_evaluated,
    })
}

/// Per-cell argmax labeling of the class densities, with equiprobable
/// priors. Cells where every class density sits below the floor stay
/// unlabeled; ties go to the lowest dataset index.
#[derive(Debug, Clone, Serialize)]
pub struct DecisionMap {
    grid: FeatureGrid,
    labels: Vec<String>,
    cells: Vec<Option<u16>>,
    floor: f64,
}

impl DecisionMap {
    pub fn grid(&self) -> &FeatureGrid {
        &self.grid
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn cell(&self, ix: usize, iy: usize) -> Option<usize> {
        self.cells[self.grid.flat(ix, iy)].map(|i| i as usize)
    }

    pub fn label_at(&self, ix: usize, iy: usize) -> Option<&str> {
        self.cell(ix, iy).map(|i| self.labels[i].as_str())
    }

    /// Cell totals per label plus the unlabeled count, in label order.
    pub fn tally(&self) -> (Vec<usize>, usize) {
        let mut counts = vec![0usize; self.labels.len()];
        let mut none = 0usize;
        for c in &self.cells {
            match c {
                Some(i) => counts[*i as usize] += 1,
                None => none += 1,
            }
        }
        (counts, none)
    }

    /// One `x,y,label` row per cell; unlabeled cells say `none`.
    pub fn to_csv(&self) -> String {
        let res = self.grid.resolution;
        let mut out = String::from("x,y,label\n");
        for ix in 0..res {
            for iy in 0..res {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    self.grid.coordinate(0, ix),
                    self.grid.coordinate(1, iy),
                    self.label_at(ix, iy).unwrap_or("none")
                );
            }
        }
        out
    }

    /// PGM (P2) with max value = dataset count; 0 means unlabeled and
    /// dataset i renders as i + 1. Oriented like [`Density::to_pgm`].
    pub fn to_pgm(&self) -> String {
        let res = self.grid.resolution;
        let mut out = format!("P2\n{res} {res}\n{}\n", self.labels.len());
        for iy in (0..res).rev() {
            let row: Vec<String> = (0..res)
                .map(|ix| match self.cell(ix, iy) {
                    Some(i) => (i + 1).to_string(),
                    None => "0".to_string(),
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Label every grid cell with the dataset whose density dominates there.
pub fn bayes_decision_map(sfw: &StochasticFramework) -> Result<DecisionMap> {
    if sfw.len() < 2 {
        return Err(Error::domain(
            "a decision map needs at least two competing datasets",
        ));
    }
    let peak = sfw
        .densities
        .iter()
        .map(Density::peak)
        .fold(0.0, f64::max);
    let floor = BAYES_FLOOR_RATIO * peak;
    let cells = (0..sfw.grid.cell_count())
        .map(|c| {
            let mut best = 0usize;
            for i in 1..sfw.densities.len() {
                if sfw.densities[i].values[c] > sfw.densities[best].values[c] {
                    best = i;
                }
            }
            (sfw.densities[best].values[c] >= floor && floor > 0.0).then_some(best as u16)
        })
        .collect();
    Ok(DecisionMap {
        grid: sfw.grid.clone(),
        labels: sfw.labels.clone(),
        cells,
        floor,
    })
}

/// Membership counts of every dataset's points against every region at
/// one bandwidth. `counts[i][j]` is the number of dataset j points inside
/// dataset i's region.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStep {
    pub bandwidth: f64,
    pub counts: Vec<Vec<usize>>,
    /// Total absolute difference against the discrete counts.
    pub deviation: usize,
}

/// How stochastic membership approaches the discrete reference as the
/// kernel shrinks.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub labels: Vec<String>,
    pub bandwidth0: f64,
    /// Smallest distance between distinct point positions.
    pub min_distance: f64,
    /// Bandwidths below half the minimum distance must agree exactly.
    pub exact_threshold: f64,
    pub discrete_counts: Vec<Vec<usize>>,
    pub steps: Vec<ConvergenceStep>,
}

impl ConvergenceReport {
    pub fn deviations_non_increasing(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[1].deviation <= w[0].deviation)
    }

    pub fn exact_below_threshold(&self) -> bool {
        self.steps
            .iter()
            .filter(|s| s.bandwidth < self.exact_threshold)
            .all(|s| s.deviation == 0)
    }

    pub fn is_convergent(&self) -> bool {
        self.deviations_non_increasing()
            && self.exact_below_threshold()
            && self
                .steps
                .iter()
                .any(|s| s.bandwidth < self.exact_threshold)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "convergence toward discrete membership (min distance {}, exact below {})",
            self.min_distance, self.exact_threshold
        );
        let _ = writeln!(out, "  discrete: {:?}", self.discrete_counts);
        for s in &self.steps {
            let _ = writeln!(
                out,
                "  bandwidth {:>12.6}: {:?}  deviation {}",
                s.bandwidth, s.counts, s.deviation
            );
        }
        let _ = writeln!(out, "  convergent: {}", self.is_convergent());
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// Discrete counterpart of a stochastic framework: one element per
/// distinct coordinate pair, one indicator-backed pairing per dataset.
/// Point datasets sharing a coordinate share the element.
pub fn discrete_point_framework(
    universe: impl Into<String>,
    axes: &[String; 2],
    datasets: &[(String, Vec<[f64; 2]>)],
) -> Result<Framework> {
    let mut fw = Framework::new(universe);
    fw.register_feature(crate::framework::FeatureDef::new(
        axes[0].clone(),
        crate::framework::FeatureKind::Float,
    ))?;
    fw.register_feature(crate::framework::FeatureDef::new(
        axes[1].clone(),
        crate::framework::FeatureKind::Float,
    ))?;
    let mut seen: BTreeMap<(u64, u64), ElementId> = BTreeMap::new();
    let mut batch = Vec::new();
    for (_, pts) in datasets {
        for p in pts {
            let key = (p[0].to_bits(), p[1].to_bits());
            if seen.contains_key(&key) {
                continue;
            }
            let id = ElementId::Name(format!("p_{}_{}", p[0], p[1]));
            seen.insert(key, id.clone());
            let mut fv = crate::framework::FeatureVector::new();
            fv.insert(
                axes[0].clone(),
                crate::framework::FeatureValue::Float(p[0]),
            );
            fv.insert(
                axes[1].clone(),
                crate::framework::FeatureValue::Float(p[1]),
            );
            batch.push((id, fv));
        }
    }
    fw.ingest_elements(batch)?;
    for (label, pts) in datasets {
        let members: Vec<ElementId> = {
            let mut m = Vec::new();
            for p in pts {
                let key = (p[0].to_bits(), p[1].to_bits());
                let id = seen.get(&key).expect("inserted above").clone();
                if !m.contains(&id) {
                    m.push(id);
                }
            }
            m
        };
        fw.pair_data(label.clone(), members)?;
    }
    Ok(fw)
}

/// Shrink the kernel by halves and watch the region memberships settle
/// onto the discrete framework's counts. The grid is refit to the data at
/// every bandwidth so the margin stays proportional.
pub fn convergence_check(
    sfw: &StochasticFramework,
    discrete: &Framework,
    halvings: usize,
) -> Result<ConvergenceReport> {
    let axes = sfw.grid.axes().clone();
    // Discrete reference: a point belongs to pairing i when the element at
    // its exact coordinates is a member of that pairing's dataset.
    let mut by_coords: BTreeMap<(u64, u64), ElementId> = BTreeMap::new();
    for (id, fv) in discrete.elements() {
        let x = fv
            .get(&axes[0])
            .and_then(crate::framework::FeatureValue::as_f64);
        let y = fv
            .get(&axes[1])
            .and_then(crate::framework::FeatureValue::as_f64);
        if let (Some(x), Some(y)) = (x, y) {
            by_coords.insert((x.to_bits(), y.to_bits()), id.clone());
        }
    }
    let n = sfw.len();
    let mut discrete_counts = vec![vec![0usize; n]; n];
    for (i, label) in sfw.labels.iter().enumerate() {
        let dataset = discrete.pairing(label)?.dataset();
        for (j, pts) in sfw.points.iter().enumerate() {
            for p in pts {
                let id = by_coords
                    .get(&(p[0].to_bits(), p[1].to_bits()))
                    .ok_or_else(|| {
                        Error::domain(format!(
                            "point ({}, {}) has no element in the discrete framework",
                            p[0], p[1]
                        ))
                    })?;
                if dataset.contains(id) {
                    discrete_counts[i][j] += 1;
                }
            }
        }
    }

    // Smallest gap between distinct positions; zero when all coincide.
    let mut positions: Vec<[f64; 2]> = Vec::new();
    for p in &sfw.union_points {
        if !positions
            .iter()
            .any(|q| q[0].to_bits() == p[0].to_bits() && q[1].to_bits() == p[1].to_bits())
        {
            positions.push(*p);
        }
    }
    let mut min_distance = f64::INFINITY;
    for (i, p) in positions.iter().enumerate() {
        for q in &positions[i + 1..] {
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            min_distance = min_distance.min(d);
        }
    }
    if !min_distance.is_finite() {
        min_distance = 0.0;
    }

    let mut steps = Vec::new();
    for k in 0..=halvings {
        let bandwidth = sfw.bandwidth / (1u64 << k) as f64;
        let grid = FeatureGrid::covering(
            axes.clone(),
            &sfw.union_points,
            GRID_MARGIN_RADII * bandwidth,
            sfw.grid.resolution(),
        )?;
        let regions: Vec<SupportRegion> = sfw
            .points
            .iter()
            .map(|pts| support_region(&kde(pts, bandwidth, &grid)?, sfw.chi))
            .collect::<Result<_>>()?;
        let counts: Vec<Vec<usize>> = regions
            .iter()
            .map(|region| {
                sfw.points
                    .iter()
                    .map(|pts| pts.iter().filter(|p| region.contains_point(**p)).count())
                    .collect()
            })
            .collect();
        let deviation = counts
            .iter()
            .flatten()
            .zip(discrete_counts.iter().flatten())
            .map(|(a, b)| a.abs_diff(*b))
            .sum();
        steps.push(ConvergenceStep {
            bandwidth,
            counts,
            deviation,
        });
    }
    Ok(ConvergenceReport {
        labels: sfw.labels.clone(),
        bandwidth0: sfw.bandwidth,
        min_distance,
        exact_threshold: min_distance / 2.0,
        discrete_counts,
        steps,
    })
}
