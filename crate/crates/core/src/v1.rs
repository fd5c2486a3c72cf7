//! Orientation filtering: Gabor bank, rectified response maps and the
//! winner-take-all inhibition that collapses them into one code map.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::retina::Retina;

/// Orientation codes: 0 = blank, then 1..=4 for 0, 45, 90 and 135 degrees.
pub const ORIENTATIONS: [f64; 4] = [0.0, 45.0, 90.0, 135.0];

pub fn orientation_angle(code: u8) -> Option<f64> {
    match code {
        1..=4 => Some(ORIENTATIONS[code as usize - 1]),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct GaborKernel {
    pub theta_deg: f64,
    pub weights: Grid<f64>,
}

impl GaborKernel {
    /// Builds a `size`x`size` kernel; `size` must be odd so a center exists.
    ///
    /// Grid rows follow the first spatial coordinate, so the 0-degree kernel
    /// oscillates down the rows and responds to horizontal structure.
    pub fn new(theta_deg: f64, sigma: f64, lambda: f64, gamma: f64, size: usize) -> Result<Self> {
        if size.is_multiple_of(2) || size == 0 {
            return Err(Error::Config(format!("kernel size {size} must be odd")));
        }
        if sigma <= 0.0 || lambda <= 0.0 {
            return Err(Error::Config("sigma and lambda must be positive".into()));
        }
        let theta = theta_deg.to_radians();
        let (sin_t, cos_t) = theta.sin_cos();
        let half = (size / 2) as i64;
        let mut data = Vec::with_capacity(size * size);
        for row in -half..=half {
            for col in -half..=half {
                let (x, y) = (row as f64, col as f64);
                let x_o = x * cos_t + y * sin_t;
                let y_o = -x * sin_t + y * cos_t;
                let envelope = (-(x_o * x_o + gamma * gamma * y_o * y_o) / (2.0 * sigma * sigma))
                    .exp();
                let carrier = (2.0 * std::f64::consts::PI * x_o / lambda).cos();
                data.push(envelope * carrier);
            }
        }
        Ok(GaborKernel {
            theta_deg,
            weights: Grid::from_vec(size, size, data),
        })
    }

    pub fn size(&self) -> usize {
        self.weights.height()
    }

    /// Subtracts the mean weight so flat inputs produce zero response.
    pub fn zero_mean(mut self) -> Self {
        let mean = self.weights.iter().sum::<f64>() / self.weights.len() as f64;
        for w in self.weights.iter_mut() {
            *w -= mean;
        }
        self
    }

    /// Scales weights to unit Euclidean norm.
    pub fn unit_norm(mut self) -> Self {
        let norm = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in self.weights.iter_mut() {
                *w /= norm;
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KernelParams {
    pub sigma: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub size: usize,
    pub zero_mean: bool,
    pub unit_norm: bool,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            sigma: 2.8,
            lambda: 3.5,
            gamma: 0.3,
            size: 7,
            zero_mean: false,
            unit_norm: false,
        }
    }
}

/// The four-orientation filter bank applied to every stimulus.
#[derive(Debug, Clone)]
pub struct GaborBank {
    pub kernels: Vec<GaborKernel>,
    pub params: KernelParams,
}

impl GaborBank {
    pub fn new(params: KernelParams) -> Result<Self> {
        let mut kernels = Vec::with_capacity(ORIENTATIONS.len());
        for &theta in &ORIENTATIONS {
            let mut k = GaborKernel::new(theta, params.sigma, params.lambda, params.gamma, params.size)?;
            if params.zero_mean {
                k = k.zero_mean();
            }
            if params.unit_norm {
                k = k.unit_norm();
            }
            kernels.push(k);
        }
        Ok(GaborBank { kernels, params })
    }
}

/// Rectified responses of one kernel, `code` identifying its orientation.
#[derive(Debug, Clone)]
pub struct OrientationMap {
    pub code: u8,
    pub responses: Grid<f64>,
}

/// Raw (signed) sliding-window responses without padding, so the output is
/// `(H - S + 1) x (W - S + 1)`. The kernel is centrally symmetric, which makes
/// convolution and correlation agree.
pub fn convolve_values(values: &Grid<f64>, kernel: &GaborKernel) -> Result<Grid<f64>> {
    let (h, w) = values.dims();
    let s = kernel.size();
    if h < s || w < s {
        return Err(Error::Dimension(format!(
            "input {h}x{w} smaller than kernel {s}x{s}"
        )));
    }
    let out_h = h - s + 1;
    let out_w = w - s + 1;
    let mut data = Vec::with_capacity(out_h * out_w);
    for top in 0..out_h {
        for left in 0..out_w {
            let mut acc = 0.0;
            for dr in 0..s {
                for dc in 0..s {
                    acc += values[(top + dr, left + dc)] * kernel.weights[(dr, dc)];
                }
            }
            data.push(acc);
        }
    }
    Ok(Grid::from_vec(out_h, out_w, data))
}

/// Applies one kernel to the retina and rectifies with absolute value.
pub fn respond(retina: &Retina, kernel: &GaborKernel, code: u8) -> Result<OrientationMap> {
    let values = retina.levels().map(|&v| v as f64 / crate::retina::LEVELS as f64);
    let raw = convolve_values(&values, kernel)?;
    Ok(OrientationMap {
        code,
        responses: raw.map(|v| v.abs()),
    })
}

pub fn respond_bank(retina: &Retina, bank: &GaborBank) -> Result<Vec<OrientationMap>> {
    bank.kernels
        .iter()
        .enumerate()
        .map(|(i, k)| respond(retina, k, i as u8 + 1))
        .collect()
}

/// A threshold below which the winning response is treated as blank,
/// expressed as a fraction of the strongest response anywhere in the maps.
pub fn blank_threshold(maps: &[OrientationMap], fraction: f64) -> f64 {
    let global_max = maps
        .iter()
        .flat_map(|m| m.responses.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    fraction * global_max
}

/// Winner-take-all across orientations. Each cell keeps only the code of its
/// strongest response; ties go to the lowest code. Cells whose winner falls
/// below the threshold, or responds not at all, become 0.
pub fn inhibit(maps: &[OrientationMap], threshold: f64) -> Result<Grid<u8>> {
    let first = maps.first().ok_or(Error::Dimension("no orientation maps".into()))?;
    let dims = first.responses.dims();
    for m in maps {
        if m.responses.dims() != dims {
            return Err(Error::Dimension("orientation maps disagree on size".into()));
        }
    }
    let (h, w) = dims;
    let mut data = Vec::with_capacity(h * w);
    for row in 0..h {
        for col in 0..w {
            let mut best_code = 0u8;
            let mut best = f64::NEG_INFINITY;
            for m in maps {
                let r = m.responses[(row, col)];
                if r > best {
                    best = r;
                    best_code = m.code;
                }
            }
            let keep = best >= threshold && best > 0.0;
            data.push(if keep { best_code } else { 0 });
        }
    }
    Ok(Grid::from_vec(h, w, data))
}

/// Code map as one line of space-separated codes per row.
pub fn dump_codes(map: &Grid<u8>) -> String {
    let (h, w) = map.dims();
    let mut out = String::new();
    for row in 0..h {
        for col in 0..w {
            if col > 0 {
                out.push(' ');
            }
            out.push_str(&map[(row, col)].to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::retina::Retina;

    fn default_kernel(theta: f64) -> GaborKernel {
        GaborKernel::new(theta, 2.8, 3.5, 0.3, 7).unwrap()
    }

    #[test]
    fn ninety_degree_kernel_is_the_transpose() {
        let k0 = default_kernel(0.0);
        let k90 = default_kernel(90.0);
        for row in 0..7 {
            for col in 0..7 {
                let diff = (k0.weights[(row, col)] - k90.weights[(col, row)]).abs();
                assert!(diff < 1e-12, "({row},{col}) differs by {diff}");
            }
        }
    }

    #[test]
    fn kernel_is_centrally_symmetric() {
        for &theta in &ORIENTATIONS {
            let k = default_kernel(theta);
            for row in 0..7 {
                for col in 0..7 {
                    let a = k.weights[(row, col)];
                    let b = k.weights[(6 - row, 6 - col)];
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn center_weight_is_one() {
        // At the center x_o = y_o = 0, so envelope and carrier are both 1.
        for &theta in &ORIENTATIONS {
            let k = default_kernel(theta);
            assert!((k.weights[(3, 3)] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn even_kernel_size_is_rejected() {
        assert!(GaborKernel::new(0.0, 2.8, 3.5, 0.3, 8).is_err());
    }

    #[test]
    fn convolution_is_linear() {
        let k = default_kernel(45.0);
        let a = Grid::from_vec(7, 7, (0..49).map(|i| (i as f64 * 0.13).sin()).collect());
        let b = Grid::from_vec(7, 7, (0..49).map(|i| (i as f64 * 0.07).cos()).collect());
        let combined = Grid::from_vec(
            7,
            7,
            (0..49)
                .map(|i| 2.0 * a[(i / 7, i % 7)] + 3.0 * b[(i / 7, i % 7)])
                .collect(),
        );
        let ra = convolve_values(&a, &k).unwrap()[(0, 0)];
        let rb = convolve_values(&b, &k).unwrap()[(0, 0)];
        let rc = convolve_values(&combined, &k).unwrap()[(0, 0)];
        assert!((rc - (2.0 * ra + 3.0 * rb)).abs() < 1e-9);
    }

    #[test]
    fn output_shrinks_by_kernel_size() {
        let retina = Retina::from_levels(Grid::filled(20, 13, 5u8)).unwrap();
        let map = respond(&retina, &default_kernel(0.0), 1).unwrap();
        assert_eq!(map.responses.dims(), (14, 7));
    }

    #[test]
    fn horizontal_bar_wins_with_code_one() {
        // A horizontal bar: rows 8..13 bright on a dark field.
        let mut levels = Grid::filled(20, 20, 0u8);
        for row in 8..13 {
            for col in 0..20 {
                levels[(row, col)] = 10;
            }
        }
        let retina = Retina::from_levels(levels).unwrap();
        let bank = GaborBank::new(KernelParams::default()).unwrap();
        let maps = respond_bank(&retina, &bank).unwrap();
        // Compare at a window whose center sits on the bar's top edge.
        let horizontal = &maps[0].responses;
        let vertical = &maps[2].responses;
        let (row, col) = (5, 7);
        assert!(
            horizontal[(row, col)] > vertical[(row, col)],
            "horizontal {} vs vertical {}",
            horizontal[(row, col)],
            vertical[(row, col)]
        );
        let threshold = blank_threshold(&maps, 0.1);
        let codes = inhibit(&maps, threshold).unwrap();
        let ones = codes.iter().filter(|&&c| c == 1).count();
        let threes = codes.iter().filter(|&&c| c == 3).count();
        assert!(ones > threes, "{ones} horizontal vs {threes} vertical cells");
    }

    #[test]
    fn blank_input_stays_blank() {
        let retina = Retina::from_levels(Grid::filled(12, 12, 0u8)).unwrap();
        let bank = GaborBank::new(KernelParams::default()).unwrap();
        let maps = respond_bank(&retina, &bank).unwrap();
        let threshold = blank_threshold(&maps, 0.1);
        assert_eq!(threshold, 0.0);
        let codes = inhibit(&maps, threshold).unwrap();
        assert!(codes.iter().all(|&c| c == 0));
    }

    #[test]
    fn ties_go_to_the_lowest_code() {
        let flat = |code| OrientationMap {
            code,
            responses: Grid::filled(2, 2, 1.0),
        };
        let maps = vec![flat(1), flat(2), flat(3), flat(4)];
        let codes = inhibit(&maps, 0.5).unwrap();
        assert!(codes.iter().all(|&c| c == 1));
    }

    #[test]
    fn dump_is_line_per_row() {
        let map = Grid::from_vec(2, 3, vec![0u8, 1, 2, 3, 4, 0]);
        assert_eq!(dump_codes(&map), "0 1 2\n3 4 0\n");
    }
}
