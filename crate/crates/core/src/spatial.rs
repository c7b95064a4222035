//! Inter-region geometry: great-circle distances, the row-normalised
//! inverse-distance weight matrix and spatial lags.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG) in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Pairwise distances below this are clamped before inversion.
pub const DISTANCE_FLOOR_KM: f64 = 1.0;

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::InvalidInput(format!(
                "latitude {} outside [-90, 90]",
                self.lat
            )));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidInput(format!(
                "longitude {} outside [-180, 180]",
                self.lon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    pub location: LatLon,
}

impl Region {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64) -> Self {
        Self {
            id: id.into(),
            location: LatLon::new(lat, lon),
        }
    }
}

/// An ordered, validated collection of at least two regions with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    regions: Vec<Region>,
}

impl RegionSet {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.len() < 2 {
            return Err(Error::Degenerate(format!(
                "a spatial matrix needs at least 2 regions, got {}",
                regions.len()
            )));
        }
        let mut seen = HashSet::with_capacity(regions.len());
        for r in &regions {
            r.location
                .validate()
                .map_err(|e| Error::InvalidInput(format!("region '{}': {e}", r.id)))?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate region id '{}'",
                    r.id
                )));
            }
        }
        Ok(Self { regions })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }
}

/// Haversine great-circle distance in kilometres.
pub fn geodesic_distance(a: LatLon, b: LatLon) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // rounding can push h marginally past 1 for antipodes
    Ok(2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin())
}

/// Row-stochastic inverse-distance weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMatrix {
    weights: DMatrix<f64>,
    alpha: f64,
}

impl SpatialMatrix {
    /// `S[i][j] = d_ij^-alpha / sum_{k != i} d_ik^-alpha`, `S[i][i] = 0`.
    pub fn build(regions: &RegionSet, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "decay exponent alpha must be positive and finite, got {alpha}"
            )));
        }
        let n = regions.len();
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "a spatial matrix needs at least 2 regions, got {n}"
            )));
        }
        let locs: Vec<LatLon> = regions.regions().iter().map(|r| r.location).collect();
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut total = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = geodesic_distance(locs[i], locs[j])?.max(DISTANCE_FLOOR_KM);
                let w = d.powf(-alpha);
                weights[(i, j)] = w;
                total += w;
            }
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "row {i} of the spatial matrix cannot be normalised (sum = {total})"
                )));
            }
            for j in 0..n {
                weights[(i, j)] /= total;
            }
        }
        Ok(Self { weights, alpha })
    }

    /// Wraps an existing weight matrix after checking the row-stochastic
    /// invariants (used when reading `spatial_matrix.csv`).
    pub fn from_weights(weights: DMatrix<f64>, alpha: f64) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "spatial matrix columns",
                expected: n,
                actual: weights.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "a spatial matrix needs at least 2 regions, got {n}"
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "spatial matrix diagonal entry {i} is {}, expected 0",
                    weights[(i, i)]
                )));
            }
            let row = weights.row(i);
            if row.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "spatial matrix row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "spatial matrix row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { weights, alpha })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// `out[i][t] = sum_j S[i][j] * series[j][t]`. The caller picks the time
    /// alignment.
    pub fn spatial_lag(&self, series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if series.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "series rows vs spatial matrix size",
                expected: self.n(),
                actual: series.nrows(),
            });
        }
        Ok(&self.weights * series)
    }

    /// `S^2`, used for the second-order lag instrument.
    pub fn squared(&self) -> DMatrix<f64> {
        &self.weights * &self.weights
    }
}
