//! Parallel frame generation and reduction.
//!
//! Work is split into contiguous frame ranges. Each range produces its own
//! accumulator and the accumulators are merged in range order, so results do
//! not depend on the number of workers or threads.

use std::fs::File;
use std::io::{BufReader, Write};
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use twophoton_core::framepipe::{
    classify_and_filter, detect_photons, detect_photons_sparse, estimate_marginal,
    superpixel_bin_1d, threshold_frame, CoincidenceAccumulator, FrameCounters,
};
use twophoton_core::patterns::{excess_pattern, FringePattern1D, JointPattern2D, RegionOfInterest};
use twophoton_core::sensor::{Frame, FrameSimulator, PhotonEvent};
use twophoton_core::visibility::{
    fit_fringe_visibility, fit_joint_visibility, FitOptions, FringeFit, JointFit, JointFitOptions,
};

use crate::bifr::{BifrReader, BifrWriter, FormatError, Header};
use crate::config::ExperimentConfig;
use crate::error::{AppError, Result};
use crate::model;
use crate::stats::{two_sample_chi_square, ChiSquareTest};

/// Frames rendered in parallel before being written in order.
const WRITE_BATCH: u64 = 64;

/// Runs `f` on a pool with `threads` workers (0 = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Splits `0..n` into `parts` contiguous ranges of near-equal length.
pub fn frame_ranges(n: u64, parts: usize) -> Vec<Range<u64>> {
    let parts = parts.max(1) as u64;
    (0..parts)
        .map(|i| i * n / parts..(i + 1) * n / parts)
        .collect()
}

/// Frame simulator for the configured geometry at `config.distance`.
pub fn simulator(config: &ExperimentConfig) -> Result<FrameSimulator> {
    let point = model::evaluate(config, config.distance)?;
    let set = model::patterns(config, &point)?;
    Ok(FrameSimulator::new(
        &set.coincidence,
        config.camera.clone(),
        config.mean_pairs,
    )?)
}

/// Writes `frames` simulated frames to `out` in index order.
pub fn generate_run<W: Write>(sim: &FrameSimulator, frames: u64, out: W) -> Result<W> {
    let cam = sim.camera();
    let header = Header {
        width: cam.width as u16,
        height: cam.height as u16,
        frames: frames as u32,
    };
    let mut writer = BifrWriter::new(out, header)?;
    let mut start = 0;
    while start < frames {
        let end = (start + WRITE_BATCH).min(frames);
        let batch: Vec<Frame> = (start..end)
            .into_par_iter()
            .map(|k| sim.frame(k).frame.to_dense())
            .collect();
        for f in &batch {
            writer.write_frame(f)?;
        }
        start = end;
    }
    Ok(writer.finish()?)
}

fn add_events(
    acc: &mut CoincidenceAccumulator,
    events: &[PhotonEvent],
    config: &ExperimentConfig,
) -> Result<()> {
    let class = classify_and_filter(events, config.camera.strip, &config.pair_filter);
    acc.add_frame(&class)?;
    Ok(())
}

/// Accumulates simulated frames without writing them, using the sparse detection path.
pub fn accumulate_simulated(
    sim: &FrameSimulator,
    frames: u64,
    config: &ExperimentConfig,
) -> Result<CoincidenceAccumulator> {
    let ranges = frame_ranges(frames, config.workers);
    let partial: Vec<Result<CoincidenceAccumulator>> = ranges
        .into_par_iter()
        .map(|range| {
            let mut acc = CoincidenceAccumulator::new(config.camera.width);
            for k in range {
                let frame = sim.frame(k).frame;
                let events =
                    detect_photons_sparse(&frame, config.camera.threshold, config.min_patch);
                add_events(&mut acc, &events, config)?;
            }
            Ok(acc)
        })
        .collect();
    merge_in_order(partial, config.camera.width)
}

fn merge_in_order(
    partial: Vec<Result<CoincidenceAccumulator>>,
    width: usize,
) -> Result<CoincidenceAccumulator> {
    let mut total = CoincidenceAccumulator::new(width);
    for acc in partial {
        total.merge(&acc?)?;
    }
    Ok(total)
}

fn open_reader(path: &Path) -> Result<BifrReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    Ok(BifrReader::new(BufReader::with_capacity(1 << 20, file))?)
}

/// Header of a frame file, validated against the file length.
pub fn inspect(path: &Path) -> Result<Header> {
    let header = open_reader(path)?.header();
    let len = std::fs::metadata(path)
        .map_err(|e| AppError::io(path, e))?
        .len();
    if len < header.file_len() {
        let frame = (len.saturating_sub(crate::bifr::HEADER_LEN)) / header.frame_bytes();
        return Err(FormatError::Truncated {
            offset: len,
            frame,
            needed: header.file_len() - len,
        }
        .into());
    }
    Ok(header)
}

/// Reads a frame file with `config.workers` readers and accumulates it.
pub fn accumulate_file(path: &Path, config: &ExperimentConfig) -> Result<CoincidenceAccumulator> {
    let header = inspect(path)?;
    let width = header.width as usize;
    if width != config.camera.width || header.height as usize != config.camera.height {
        return Err(AppError::Config(format!(
            "frame file is {}x{}, configuration expects {}x{}",
            header.width, header.height, config.camera.width, config.camera.height
        )));
    }
    let partial: Vec<Result<CoincidenceAccumulator>> =
        frame_ranges(header.frames as u64, config.workers)
            .into_par_iter()
            .map(|range| {
                let mut acc = CoincidenceAccumulator::new(width);
                if range.is_empty() {
                    return Ok(acc);
                }
                let mut reader = open_reader(path)?;
                reader.seek_frame(range.start)?;
                for _ in range {
                    let frame = reader
                        .read_frame()?
                        .expect("range lies inside the header's frame count");
                    let binary = threshold_frame(&frame, config.camera.threshold);
                    let events = detect_photons(&binary, &frame, config.min_patch)?;
                    add_events(&mut acc, &events, config)?;
                }
                Ok(acc)
            })
            .collect();
    merge_in_order(partial, width)
}

/// Everything recovered from an accumulator.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub counters: FrameCounters,
    pub estimate: JointPattern2D,
    pub marginal: FringePattern1D,
    pub excess: JointPattern2D,
    /// Fringe fit to the estimate's marginal.
    pub v1m: FringeFit,
    /// Joint fit to the excess estimate.
    pub v12: JointFit,
    /// Fringe fit to the single-photon histogram, if any singles were seen.
    pub v1_singles: Option<FringeFit>,
    /// Estimate marginal against the singles histogram on superpixels.
    pub singles_test: Option<ChiSquareTest>,
}

pub fn reduce(acc: &CoincidenceAccumulator, config: &ExperimentConfig) -> Result<Reduction> {
    let period = config.period();
    let estimate = acc.finalize(config.camera.pitch)?;
    let marginal = estimate_marginal(&estimate)?;
    let env = if config.envelope {
        Some(model::envelope(config)?)
    } else {
        None
    };
    let options = FitOptions {
        envelope: env.as_deref(),
        ..FitOptions::default()
    };
    let v1m = fit_fringe_visibility(&marginal, period, &options)?;
    let excess = excess_pattern(
        &estimate,
        &marginal,
        RegionOfInterest::IntegerPeriods(period),
    )?;
    let v12 = fit_joint_visibility(
        &excess,
        period,
        &JointFitOptions {
            diagonal_band: Some(3),
        },
    )?;

    let singles: Vec<f64> = acc.singles().iter().map(|&c| c as f64).collect();
    let (v1_singles, singles_test) = if singles.iter().sum::<f64>() > 0.0 {
        let hist = FringePattern1D::new(*estimate.grid(), singles.clone(), None)?;
        let fit = fit_fringe_visibility(&hist, period, &options).ok();
        // each accepted pair contributes two photons to the marginal
        let photons = 2.0 * acc.counters().pair as f64;
        let dx = estimate.grid().spacing();
        let expected: Vec<f64> = marginal.values().iter().map(|m| m * dx * photons).collect();
        let test = two_sample_chi_square(
            &superpixel_bin_1d(&singles, config.superpixel)?,
            &superpixel_bin_1d(&expected, config.superpixel)?,
        )?;
        (fit, Some(test))
    } else {
        (None, None)
    };
    Ok(Reduction {
        counters: acc.counters(),
        estimate,
        marginal,
        excess,
        v1m,
        v12,
        v1_singles,
        singles_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_everything() {
        for (n, parts) in [(0, 4), (10, 1), (10, 3), (7, 16)] {
            let r = frame_ranges(n, parts);
            assert_eq!(r.len(), parts);
            assert_eq!(r[0].start, 0);
            assert_eq!(r.last().unwrap().end, n);
            assert!(r.windows(2).all(|w| w[0].end == w[1].start));
        }
    }
}
