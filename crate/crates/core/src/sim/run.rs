//! Frame-level trials and outage estimation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use crate::baselines::{backhaul_load, IdealCompDetector, NonIdealComp, Scheme};
use crate::bmas::{fallback_assignment, online_select, Assignment, CandidateTable};
use crate::error::{Error, Result};
use crate::modem::Constellation;
use crate::phy::channel::{complex_gaussian, noise_variance};
use crate::phy::conv;
use crate::phy::llr::NcvDemapper;
use crate::phy::quant::LlrQuantizer;
use crate::stats::{wilson_interval, Z95};

/// Everything a trial needs besides its index.
#[derive(Clone, Debug)]
pub struct TrialContext {
    pub config: SimConfig,
    pub constellation: Constellation,
    pub tables: Vec<CandidateTable>,
}

/// Block heights the scenario needs from candidate tables.
pub fn required_rows(config: &SimConfig) -> Vec<usize> {
    let bits = config.scenario().message_bits();
    let n = config.scenario.aps;
    let mut rows = vec![bits / n];
    if !bits.is_multiple_of(n) {
        rows.push(bits / n + 1);
    }
    rows
}

/// Checks that `tables` serve the scenario.
pub fn check_tables(config: &SimConfig, tables: &[CandidateTable]) -> Result<()> {
    let sc = config.scenario();
    let want = format!(
        "constellation={} mts={} rows={:?}",
        sc.modulation,
        sc.mts,
        required_rows(config)
    );
    for t in tables {
        if t.modulation != sc.modulation || t.mts != sc.mts {
            return Err(Error::Config(format!(
                "atlas header does not match the scenario\n  atlas:    {}\n  scenario: {want}",
                t.header()
            )));
        }
    }
    for r in required_rows(config) {
        if !tables.iter().any(|t| t.rows == r) {
            let have: Vec<String> = tables.iter().map(|t| t.header().to_string()).collect();
            return Err(Error::Config(format!(
                "no atlas with {r} rows per access point\n  atlases:  [{}]\n  scenario: {want}",
                have.join(", ")
            )));
        }
    }
    Ok(())
}

impl TrialContext {
    pub fn new(config: SimConfig, tables: Vec<CandidateTable>) -> Result<Self> {
        config.validate()?;
        if config.scenario.schemes.contains(&Scheme::Bmas) {
            if tables.is_empty() {
                return Err(Error::Config("scheme bmas needs at least one atlas".into()));
            }
            check_tables(&config, &tables)?;
        }
        Ok(Self {
            constellation: Constellation::new(config.scenario.modulation),
            config,
            tables,
        })
    }

    /// Reads the atlases named in the configuration.
    pub fn load(config: SimConfig) -> Result<Self> {
        let tables = config
            .atlas
            .paths
            .iter()
            .map(|p| CandidateTable::read_atlas(p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(config, tables)
    }

    fn layer_len(&self) -> usize {
        self.config.run.info_bits / self.constellation.order()
    }

    fn frame_len(&self) -> usize {
        if self.config.run.coding {
            conv::coded_len(self.layer_len())
        } else {
            self.layer_len()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialOutcome {
    pub outage: bool,
    pub degraded: bool,
}

/// Random draws of one trial, shared by every scheme and SNR point.
struct FrameDraw {
    channels: Vec<Vec<Complex64>>,
    /// `info[l][k]`: layer `k` of terminal `l`.
    info: Vec<Vec<Vec<u8>>>,
    /// Transmitted labels per terminal per symbol.
    labels: Vec<Vec<usize>>,
    /// Unit-variance noise per access point per symbol.
    noise: Vec<Vec<Complex64>>,
}

/// Generator of trial `index`: the master seed selects the key and the trial
/// index the stream, so results do not depend on execution order.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_frame(ctx: &TrialContext, index: u64) -> Result<FrameDraw> {
    let cfg = &ctx.config;
    let (u, n, m) = (cfg.scenario.mts, cfg.scenario.aps, ctx.constellation.order());
    let mut rng = trial_rng(cfg.run.seed, index);
    let channels: Vec<Vec<Complex64>> = (0..n)
        .map(|_| (0..u).map(|_| complex_gaussian(&mut rng)).collect())
        .collect();
    let layer = ctx.layer_len();
    let info: Vec<Vec<Vec<u8>>> = (0..u)
        .map(|_| (0..m).map(|_| (0..layer).map(|_| rng.random_range(0..2u8)).collect()).collect())
        .collect();
    let len = ctx.frame_len();
    let mut labels = vec![vec![0usize; len]; u];
    for (l, layers) in info.iter().enumerate() {
        for (k, bits) in layers.iter().enumerate() {
            let code = if cfg.run.coding { conv::encode(bits)? } else { bits.clone() };
            for (t, &b) in code.iter().enumerate() {
                labels[l][t] |= (b as usize) << (m - 1 - k);
            }
        }
    }
    let noise = (0..n)
        .map(|_| (0..len).map(|_| complex_gaussian(&mut rng)).collect())
        .collect();
    Ok(FrameDraw {
        channels,
        info,
        labels,
        noise,
    })
}

fn observations(ctx: &TrialContext, f: &FrameDraw, sigma: f64) -> Vec<Vec<Complex64>> {
    let c = &ctx.constellation;
    f.channels
        .iter()
        .zip(&f.noise)
        .map(|(h, z)| {
            z.iter()
                .enumerate()
                .map(|(t, &zt)| {
                    h.iter()
                        .enumerate()
                        .map(|(l, &g)| g * c.point(f.labels[l][t]))
                        .sum::<Complex64>()
                        + zt * sigma
                })
                .collect()
        })
        .collect()
}

fn decode_stream(ctx: &TrialContext, llrs: &[f64]) -> Result<Vec<u8>> {
    if ctx.config.run.coding {
        conv::decode(llrs, ctx.layer_len())
    } else {
        Ok(llrs.iter().map(|&l| u8::from(l < 0.0)).collect())
    }
}

/// Decodes per-bit streams ordered terminal-major and compares with the
/// transmitted layers.
fn direct_outage(ctx: &TrialContext, f: &FrameDraw, streams: &[Vec<f64>]) -> Result<bool> {
    let m = ctx.constellation.order();
    for (s, llrs) in streams.iter().enumerate() {
        if decode_stream(ctx, llrs)? != f.info[s / m][s % m] {
            return Ok(true);
        }
    }
    Ok(false)
}

fn bmas_outage(
    ctx: &TrialContext,
    f: &FrameDraw,
    ys: &[Vec<Complex64>],
    noise_var: f64,
    assignment: &Assignment,
) -> Result<bool> {
    let c = &ctx.constellation;
    let bits = c.order() * ctx.config.scenario.mts;
    let len = ctx.frame_len();
    // Decoded network-coded layers, stacked in global row order.
    let mut words: Vec<Vec<u8>> = Vec::with_capacity(bits);
    for (j, ap) in assignment.aps.iter().enumerate() {
        let r = ap.matrix.rows();
        let mut demapper = NcvDemapper::new(c, &f.channels[j], &ap.matrix, ctx.config.detector.llr)?;
        let mut streams = vec![vec![0.0; len]; r];
        let mut out = vec![0.0; r];
        let mut flags = vec![false; r];
        for t in 0..len {
            demapper.demap_into(ys[j][t], noise_var, &mut out, &mut flags);
            for k in 0..r {
                streams[k][t] = out[k];
            }
        }
        for s in &streams {
            words.push(decode_stream(ctx, s)?);
        }
    }
    let m = c.order();
    for i in 0..ctx.layer_len() {
        let word = words.iter().fold(0u64, |acc, w| acc << 1 | w[i] as u64);
        let p = assignment.recover(word);
        for l in 0..ctx.config.scenario.mts {
            for k in 0..m {
                let bit = (p >> (bits - 1 - (l * m + k))) & 1;
                if bit as u8 != f.info[l][k][i] {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

/// Per-scheme receiver state that depends only on the channel.
enum Receiver {
    Bmas(Assignment),
    Ideal(IdealCompDetector),
    Quant(NonIdealComp),
}

fn receiver(ctx: &TrialContext, scheme: Scheme, channels: &[Vec<Complex64>]) -> Result<Receiver> {
    let c = &ctx.constellation;
    let method = ctx.config.detector.llr;
    Ok(match scheme {
        Scheme::Bmas => Receiver::Bmas(if ctx.tables.is_empty() {
            fallback_assignment(c, channels)?
        } else {
            online_select(&ctx.tables, channels)?
        }),
        Scheme::CompIdeal => Receiver::Ideal(IdealCompDetector::new(c, channels, method)?),
        Scheme::CompQuant(b) => Receiver::Quant(NonIdealComp::new(
            c,
            channels,
            Some(LlrQuantizer::new(b, ctx.config.detector.clip)?),
            method,
        )?),
    })
}

fn outcome(ctx: &TrialContext, rx: &mut Receiver, f: &FrameDraw, snr_db: f64) -> Result<TrialOutcome> {
    let noise_var = noise_variance(snr_db);
    let ys = observations(ctx, f, noise_var.sqrt());
    let bits = ctx.constellation.order() * ctx.config.scenario.mts;
    let len = ctx.frame_len();
    let per_symbol = |detect: &mut dyn FnMut(&[Complex64], &mut [f64])| {
        let mut streams = vec![vec![0.0; len]; bits];
        let mut out = vec![0.0; bits];
        let mut y = vec![Complex64::default(); ys.len()];
        for t in 0..len {
            for (j, yj) in ys.iter().enumerate() {
                y[j] = yj[t];
            }
            detect(&y, &mut out);
            for k in 0..bits {
                streams[k][t] = out[k];
            }
        }
        streams
    };
    Ok(match rx {
        Receiver::Bmas(a) => TrialOutcome {
            outage: bmas_outage(ctx, f, &ys, noise_var, a)?,
            degraded: a.degraded,
        },
        Receiver::Ideal(d) => {
            let mut flags = vec![false; bits];
            let streams = per_symbol(&mut |y, out| d.detect_into(y, noise_var, out, &mut flags));
            TrialOutcome {
                outage: direct_outage(ctx, f, &streams)?,
                degraded: false,
            }
        }
        Receiver::Quant(p) => {
            let streams = per_symbol(&mut |y, out| p.detect_into(y, noise_var, out));
            TrialOutcome {
                outage: direct_outage(ctx, f, &streams)?,
                degraded: false,
            }
        }
    })
}

/// One frame of `scheme` at `snr_db`, trial `index`.
pub fn run_trial(ctx: &TrialContext, scheme: Scheme, snr_db: f64, index: u64) -> Result<TrialOutcome> {
    let f = draw_frame(ctx, index)?;
    let mut rx = receiver(ctx, scheme, &f.channels)?;
    outcome(ctx, &mut rx, &f, snr_db)
}

/// Outcomes of trial `index` at every SNR point; the receiver is set up once
/// per channel.
fn run_trial_grid(ctx: &TrialContext, scheme: Scheme, snrs: &[f64], index: u64) -> Result<Vec<TrialOutcome>> {
    let f = draw_frame(ctx, index)?;
    let mut rx = receiver(ctx, scheme, &f.channels)?;
    snrs.iter().map(|&s| outcome(ctx, &mut rx, &f, s)).collect()
}

/// Outage estimate of one scheme at one SNR point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutagePoint {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub p_out: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub frames: u64,
    pub outages: u64,
    /// Backhaul bits per channel use; `None` when unlimited.
    pub backhaul_bits: Option<usize>,
    pub degraded_count: u64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    frames: u64,
    outages: u64,
    degraded: u64,
    done: bool,
}

fn stop_early(t: &Tally, target_p: f64, planned: u64) -> bool {
    if t.frames >= planned {
        return true;
    }
    if target_p <= 0.0 || t.outages == 0 {
        return false;
    }
    let (lo, hi) = wilson_interval(t.outages, t.frames, Z95);
    hi - lo < 0.2 * (t.outages as f64 / t.frames as f64)
}

/// Runs every scheme at every SNR point.
///
/// Trial `i` uses the same channel, data and unit noise for all schemes and
/// SNR points. Without early stopping each point runs `run.frames` trials.
/// With `run.target_p > 0` a point runs up to `max(frames, 100 / target_p)`
/// trials in batches of `frames`, stopping after a batch once the Wilson
/// interval is narrower than a fifth of the estimate.
pub fn estimate_outage(ctx: &TrialContext) -> Result<Vec<OutagePoint>> {
    let cfg = &ctx.config;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let batch = cfg.run.frames;
    let planned = if cfg.run.target_p > 0.0 {
        batch.max((100.0 / cfg.run.target_p).ceil() as u64)
    } else {
        batch
    };
    let snrs = &cfg.run.snr_db;
    let mut results = Vec::new();
    for &scheme in &cfg.scenario.schemes {
        let mut tallies = vec![Tally::default(); snrs.len()];
        let mut start = 0u64;
        while tallies.iter().any(|t| !t.done) {
            let active: Vec<usize> = (0..snrs.len()).filter(|&i| !tallies[i].done).collect();
            let grid: Vec<f64> = active.iter().map(|&i| snrs[i]).collect();
            let end = (start + batch).min(planned);
            let outcomes: Vec<Vec<TrialOutcome>> = pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|i| run_trial_grid(ctx, scheme, &grid, i))
                    .collect::<Result<Vec<_>>>()
            })?;
            for row in &outcomes {
                for (slot, o) in active.iter().zip(row) {
                    let t = &mut tallies[*slot];
                    t.frames += 1;
                    t.outages += u64::from(o.outage);
                    t.degraded += u64::from(o.degraded);
                }
            }
            for &i in &active {
                tallies[i].done = stop_early(&tallies[i], cfg.run.target_p, planned);
            }
            start = end;
        }
        let backhaul = backhaul_load(scheme, &cfg.scenario()).total;
        for (i, t) in tallies.iter().enumerate() {
            let (ci_lo, ci_hi) = wilson_interval(t.outages, t.frames, Z95);
            results.push(OutagePoint {
                scheme,
                snr_db: snrs[i],
                p_out: t.outages as f64 / t.frames as f64,
                ci_lo,
                ci_hi,
                frames: t.frames,
                outages: t.outages,
                backhaul_bits: backhaul,
                degraded_count: t.degraded,
            });
        }
    }
    Ok(results)
}
