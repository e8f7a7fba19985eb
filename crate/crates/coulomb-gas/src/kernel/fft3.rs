//! Minimal 3D FFT on a cubic grid, axis by axis over rustfft's 1D plans.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Unnormalized inverse DFT in place: data[j] ← Σ_k data[k] e^{+2πi j·k/m}.
///
/// Layout: data[(ix·m + iy)·m + iz], z fastest.
pub fn ifft3(data: &mut [Complex64], m: usize) {
    assert_eq!(data.len(), m * m * m);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(m);

    // z-axis lines are contiguous
    fft.process(data);

    let mut line = vec![Complex64::new(0.0, 0.0); m];
    // y-axis
    for ix in 0..m {
        for iz in 0..m {
            for iy in 0..m {
                line[iy] = data[(ix * m + iy) * m + iz];
            }
            fft.process(&mut line);
            for iy in 0..m {
                data[(ix * m + iy) * m + iz] = line[iy];
            }
        }
    }
    // x-axis
    for iy in 0..m {
        for iz in 0..m {
            for ix in 0..m {
                line[ix] = data[(ix * m + iy) * m + iz];
            }
            fft.process(&mut line);
            for ix in 0..m {
                data[(ix * m + iy) * m + iz] = line[ix];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matches_direct_dft_on_small_grid() {
        let m = 4;
        let mut data = vec![Complex64::new(0.0, 0.0); m * m * m];
        for (i, v) in data.iter_mut().enumerate() {
            *v = Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
        }
        let orig = data.clone();
        ifft3(&mut data, m);
        // check a few entries against the triple sum
        for &(jx, jy, jz) in &[(0, 0, 0), (1, 2, 3), (3, 3, 1)] {
            let mut expect = Complex64::new(0.0, 0.0);
            for kx in 0..m {
                for ky in 0..m {
                    for kz in 0..m {
                        let phase = 2.0 * PI * (jx * kx + jy * ky + jz * kz) as f64 / m as f64;
                        expect += orig[(kx * m + ky) * m + kz] * Complex64::from_polar(1.0, phase);
                    }
                }
            }
            let got = data[(jx * m + jy) * m + jz];
            assert!((got - expect).norm() < 1e-12);
        }
    }
}
