//! Two-lane block scheduler.
//!
//! The sparse lane produces blocks and the alignment lane consumes them. With
//! a lookahead of `L` the producer may run up to `L` blocks ahead; a token
//! pool of `L + 1` bounds how many blocks are alive at once.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStats {
    pub blocks: usize,
    /// Most blocks alive at once, counted from the start of production to
    /// the end of consumption.
    pub peak_live: usize,
    pub produce_seconds: Vec<f64>,
    pub consume_seconds: Vec<f64>,
    pub wall_seconds: f64,
}

impl ScheduleStats {
    pub fn produce_total(&self) -> f64 {
        self.produce_seconds.iter().sum()
    }

    pub fn consume_total(&self) -> f64 {
        self.consume_seconds.iter().sum()
    }

    /// Longer lane over the wall-clock time: 1.0 means the shorter lane was
    /// completely hidden.
    pub fn overlap_efficiency(&self) -> f64 {
        if self.wall_seconds <= 0.0 {
            return 0.0;
        }
        self.produce_total().max(self.consume_total()) / self.wall_seconds
    }
}

struct Live {
    now: AtomicUsize,
    peak: AtomicUsize,
}

impl Live {
    fn enter(&self) {
        let now = self.now.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    fn leave(&self) {
        self.now.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Runs `produce(t)` then `consume(t, block)` for `t in 0..blocks`.
///
/// With `lookahead == 0` everything runs in order on the calling thread.
/// Otherwise `produce` runs on its own thread and hands finished blocks over
/// a queue of capacity `lookahead`; `consume` stays on the calling thread and
/// sees blocks in order. The first error from either side stops both.
pub fn schedule_preblocking<T, P, C>(blocks: usize, lookahead: usize, mut produce: P, mut consume: C) -> Result<ScheduleStats>
where
    T: Send,
    P: FnMut(usize) -> Result<T> + Send,
    C: FnMut(usize, T) -> Result<()>,
{
    let started = Instant::now();
    let live = Live {
        now: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    };
    let mut stats = ScheduleStats {
        blocks,
        ..ScheduleStats::default()
    };

    if lookahead == 0 {
        for t in 0..blocks {
            live.enter();
            let s = Instant::now();
            let block = produce(t)?;
            stats.produce_seconds.push(s.elapsed().as_secs_f64());
            let s = Instant::now();
            consume(t, block)?;
            stats.consume_seconds.push(s.elapsed().as_secs_f64());
            live.leave();
        }
        stats.peak_live = live.peak.load(Ordering::SeqCst);
        stats.wall_seconds = started.elapsed().as_secs_f64();
        return Ok(stats);
    }

    let (token_tx, token_rx) = sync_channel::<()>(lookahead + 1);
    for _ in 0..=lookahead {
        token_tx.send(()).expect("token pool sized for all tokens");
    }
    let (block_tx, block_rx) = sync_channel::<Result<(T, f64)>>(lookahead);

    let live = &live;
    let produced = std::thread::scope(|scope| {
        let producer = scope.spawn(move || producer_loop(blocks, &mut produce, token_rx, block_tx, live));
        let consumed = consumer_loop(blocks, &mut consume, block_rx, token_tx, live, &mut stats);
        let produce_seconds = producer.join().map_err(|_| Error::WorkerPanic)?;
        consumed?;
        Ok::<_, Error>(produce_seconds)
    })?;
    stats.produce_seconds = produced;
    stats.peak_live = live.peak.load(Ordering::SeqCst);
    stats.wall_seconds = started.elapsed().as_secs_f64();
    Ok(stats)
}

fn producer_loop<T, P>(blocks: usize, produce: &mut P, tokens: Receiver<()>, out: SyncSender<Result<(T, f64)>>, live: &Live) -> Vec<f64>
where
    P: FnMut(usize) -> Result<T>,
{
    let mut times = Vec::with_capacity(blocks);
    for t in 0..blocks {
        if tokens.recv().is_err() {
            break;
        }
        live.enter();
        let s = Instant::now();
        let result = produce(t);
        let secs = s.elapsed().as_secs_f64();
        times.push(secs);
        let failed = result.is_err();
        if out.send(result.map(|b| (b, secs))).is_err() || failed {
            break;
        }
    }
    times
}

fn consumer_loop<T, C>(
    blocks: usize,
    consume: &mut C,
    input: Receiver<Result<(T, f64)>>,
    tokens: SyncSender<()>,
    live: &Live,
    stats: &mut ScheduleStats,
) -> Result<()>
where
    C: FnMut(usize, T) -> Result<()>,
{
    for t in 0..blocks {
        let (block, _) = input
            .recv()
            .map_err(|_| Error::TransportClosed("sparse lane stopped early".into()))??;
        let s = Instant::now();
        consume(t, block)?;
        stats.consume_seconds.push(s.elapsed().as_secs_f64());
        live.leave();
        // the producer may already be done and gone
        let _ = tokens.send(());
    }
    Ok(())
}
