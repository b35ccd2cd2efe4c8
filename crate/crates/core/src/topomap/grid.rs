use ndarray::{Array2, Array3};

use super::clough_tocher::CloughTocherMesh;
use super::projection::{project, ProjectedLayout};
use crate::error::{Error, Result};
use crate::signal::Montage;
use crate::spectral::{band_centroids, BandScheme, SpectrumAnalyzer, Taper};
use crate::windowing::Window;

/// Square raster over the projected head.
///
/// The square spans `[-R - m, R + m]` on both axes, `R` being the largest
/// projected electrode radius and `m = 0.05·R`. Row 0 is the top (largest
/// `y`), column 0 the left (smallest `x`); samples sit at pixel centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub size: usize,
    pub half_extent: f64,
}

impl GridFrame {
    pub const MARGIN: f64 = 0.05;

    pub fn for_layout(layout: &ProjectedLayout, size: usize) -> Self {
        GridFrame {
            size,
            half_extent: layout.max_radius() * (1.0 + Self::MARGIN),
        }
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.half_extent / self.size as f64
    }

    pub fn center(&self, row: usize, col: usize) -> [f64; 2] {
        let h = self.pixel_size();
        [
            -self.half_extent + (col as f64 + 0.5) * h,
            self.half_extent - (row as f64 + 0.5) * h,
        ]
    }
}

/// Interpolates one value per electrode onto a `grid_size²` raster; pixels
/// outside the electrodes' convex hull are 0.
pub fn interpolate(layout: &ProjectedLayout, values: &[f64], grid_size: usize) -> Result<Array2<f64>> {
    if layout.len() < 3 {
        return Err(Error::TooFewElectrodes(layout.len()));
    }
    let mesh = CloughTocherMesh::new(&layout.points)?;
    let ct = mesh.interpolant(values)?;
    let frame = GridFrame::for_layout(layout, grid_size);
    Ok(Array2::from_shape_fn((grid_size, grid_size), |(r, c)| {
        ct.eval(frame.center(r, c)).unwrap_or(0.0)
    }))
}

/// A `[row, col, band]` stack of interpolated band-centroid maps for one
/// window, in µV.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoMap {
    pub data: Array3<f32>,
    pub trial_id: String,
    pub window_start: usize,
}

impl TopoMap {
    pub fn grid(&self) -> usize {
        self.data.dim().0
    }

    pub fn bands(&self) -> usize {
        self.data.dim().2
    }
}

/// Precomputed window → tensor transform for a fixed channel layout.
///
/// The interpolant is linear in the electrode values, so each pixel is a
/// fixed weighted sum of electrode values. The weights are obtained once by
/// pushing unit vectors through the Clough-Tocher evaluation.
#[derive(Debug)]
pub struct TopoProjector {
    layout: ProjectedLayout,
    frame: GridFrame,
    /// `[pixel, canonical electrode]`; rows of outside pixels are all zero.
    weights: Array2<f64>,
    /// canonical electrode → caller's channel index
    order: Vec<usize>,
    bands: BandScheme,
    analyzer: SpectrumAnalyzer,
}

impl TopoProjector {
    /// `channels` fixes the electrode order of incoming windows.
    pub fn new<S: AsRef<str>>(
        montage: &Montage,
        channels: &[S],
        bands: BandScheme,
        grid_size: usize,
        window_width: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::InvalidConfig("grid size must be positive".into()));
        }
        let layout = project(&montage.subset(channels)?)?;
        if layout.len() < 3 {
            return Err(Error::TooFewElectrodes(layout.len()));
        }
        let mesh = CloughTocherMesh::new(&layout.points)?;
        let frame = GridFrame::for_layout(&layout, grid_size);
        let order = mesh.triangulation().canonical_order().to_vec();
        let n = layout.len();
        let pixels = grid_size * grid_size;

        let located: Vec<Option<(usize, [f64; 3])>> = (0..pixels)
            .map(|p| mesh.locate(frame.center(p / grid_size, p % grid_size)))
            .collect();
        let mut weights = Array2::zeros((pixels, n));
        let mut unit = vec![0.0; n];
        for (k, &original) in order.iter().enumerate() {
            unit[original] = 1.0;
            let ct = mesh.interpolant(&unit)?;
            for (p, loc) in located.iter().enumerate() {
                if let Some((e, b)) = *loc {
                    weights[[p, k]] = ct.eval_located(e, b);
                }
            }
            unit[original] = 0.0;
        }

        Ok(TopoProjector {
            layout,
            frame,
            weights,
            order,
            bands,
            analyzer: SpectrumAnalyzer::new(window_width, sample_rate, Taper::Rectangular)?,
        })
    }

    pub fn layout(&self) -> &ProjectedLayout {
        &self.layout
    }

    pub fn frame(&self) -> GridFrame {
        self.frame
    }

    pub fn bands(&self) -> &BandScheme {
        &self.bands
    }

    pub fn analyzer(&self) -> &SpectrumAnalyzer {
        &self.analyzer
    }

    /// Raster of one value per electrode (caller's channel order).
    pub fn rasterize(&self, values: &[f64]) -> Result<Array2<f64>> {
        if values.len() != self.order.len() {
            return Err(Error::Shape(format!(
                "{} values for {} electrodes",
                values.len(),
                self.order.len()
            )));
        }
        let canonical: Vec<f64> = self.order.iter().map(|&i| values[i]).collect();
        let g = self.frame.size;
        let mut out = Array2::zeros((g, g));
        for (slot, w) in out.iter_mut().zip(self.weights.rows()) {
            *slot = w.iter().zip(&canonical).map(|(w, v)| w * v).sum();
        }
        Ok(out)
    }

    /// Spectrum → band centroids → one raster per band.
    pub fn tensor(&self, window: &Window<'_>) -> Result<TopoMap> {
        if window.samples.nrows() != self.order.len() {
            return Err(Error::Shape(format!(
                "window has {} channels, projector expects {}",
                window.samples.nrows(),
                self.order.len()
            )));
        }
        let spec = self.analyzer.analyze(window.samples)?;
        let centroids = band_centroids(&spec, &self.bands)?;
        let g = self.frame.size;
        let mut data = Array3::zeros((g, g, self.bands.len()));
        for (b, row) in centroids.0.rows().into_iter().enumerate() {
            let map = self.rasterize(row.as_slice().expect("standard layout"))?;
            for ((r, c), v) in map.indexed_iter() {
                data[[r, c, b]] = *v as f32;
            }
        }
        Ok(TopoMap {
            data,
            trial_id: window.trial_id.to_string(),
            window_start: window.start_index,
        })
    }
}

/// One-off tensor for a single window; prefer [`TopoProjector`] for many.
pub fn build_tensor<S: AsRef<str>>(
    window: &Window<'_>,
    channels: &[S],
    sample_rate: f64,
    bands: &BandScheme,
    montage: &Montage,
    grid_size: usize,
) -> Result<TopoMap> {
    TopoProjector::new(montage, channels, bands.clone(), grid_size, window.width(), sample_rate)?
        .tensor(window)
}
