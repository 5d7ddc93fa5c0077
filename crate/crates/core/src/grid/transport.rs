//! In-process message transport between grid workers.
//!
//! Every ordered pair of ranks has its own FIFO channel, so delivery is
//! reliable and ordered per sender/receiver pair. Workers are written as
//! async functions whose only suspension point is [`Endpoint`] receive; the
//! [`GridMode::Threaded`] runner gives each worker an OS thread with blocking
//! receives, while [`GridMode::RoundRobin`] steps all workers on the calling
//! thread until each blocks, which makes execution order deterministic.

use std::future::Future;
use std::pin::Pin;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::task::{Context, Poll, Waker};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::GridConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    #[default]
    Threaded,
    RoundRobin,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficCounters {
    /// Row-broadcast steps. A step runs in every grid row at once and is
    /// counted once.
    pub broadcasts_row: u64,
    /// Column-broadcast steps, counted like `broadcasts_row`.
    pub broadcasts_col: u64,
    /// Point-to-point messages, including every edge of a broadcast tree.
    pub messages_sent: u64,
    pub bytes_sent: u64,
    /// Sum over broadcast steps of `ceil(log2(participants))`.
    pub tree_hops: u64,
}

impl TrafficCounters {
    pub fn broadcasts(&self) -> u64 {
        self.broadcasts_row + self.broadcasts_col
    }
}

#[derive(Default)]
pub(crate) struct SharedCounters {
    broadcasts_row: AtomicU64,
    broadcasts_col: AtomicU64,
    messages_sent: AtomicU64,
    bytes_sent: AtomicU64,
    tree_hops: AtomicU64,
}

impl SharedCounters {
    pub(crate) fn snapshot(&self) -> TrafficCounters {
        TrafficCounters {
            broadcasts_row: self.broadcasts_row.load(Ordering::Relaxed),
            broadcasts_col: self.broadcasts_col.load(Ordering::Relaxed),
            messages_sent: self.messages_sent.load(Ordering::Relaxed),
            bytes_sent: self.bytes_sent.load(Ordering::Relaxed),
            tree_hops: self.tree_hops.load(Ordering::Relaxed),
        }
    }
}

const POINT_TO_POINT: u8 = 0;
const ROW: u8 = 1;
const COL: u8 = 2;

struct Message {
    tag: (u8, u64),
    bytes: Vec<u8>,
}

pub(crate) fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}

/// One worker's view of the transport.
pub struct Endpoint {
    rank: usize,
    config: GridConfig,
    to: Vec<Sender<Message>>,
    from: Vec<Receiver<Message>>,
    blocking: bool,
    timeout: Duration,
    seq: [u64; 3],
    counters: Arc<SharedCounters>,
    progress: Arc<AtomicU64>,
}

impl Endpoint {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn config(&self) -> GridConfig {
        self.config
    }

    /// `(grid row, grid column)` of this worker.
    pub fn coords(&self) -> (usize, usize) {
        self.config.coords(self.rank)
    }

    fn post(&mut self, to: usize, tag: (u8, u64), bytes: Vec<u8>) -> Result<()> {
        self.counters.messages_sent.fetch_add(1, Ordering::Relaxed);
        self.counters.bytes_sent.fetch_add(bytes.len() as u64, Ordering::Relaxed);
        self.to[to]
            .send(Message { tag, bytes })
            .map_err(|_| Error::TransportClosed(format!("rank {to} has exited")))
    }

    async fn take(&mut self, from: usize, tag: (u8, u64)) -> Result<Vec<u8>> {
        let rank = self.rank;
        let msg = if self.blocking {
            match self.from[from].recv_timeout(self.timeout) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => return Err(Error::CollectiveTimeout { rank, from }),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::TransportClosed(format!("rank {from} exited before sending to {rank}")))
                }
            }
        } else {
            let rx = &self.from[from];
            std::future::poll_fn(|_| match rx.try_recv() {
                Ok(m) => Poll::Ready(Ok(m)),
                Err(TryRecvError::Empty) => Poll::Pending,
                Err(TryRecvError::Disconnected) => Poll::Ready(Err(Error::TransportClosed(format!(
                    "rank {from} exited before sending to {rank}"
                )))),
            })
            .await?
        };
        self.progress.fetch_add(1, Ordering::Relaxed);
        if msg.tag != tag {
            return Err(Error::CollectiveMismatch {
                rank,
                expected: tag,
                got: msg.tag,
            });
        }
        Ok(msg.bytes)
    }

    pub fn send(&mut self, to: usize, bytes: Vec<u8>) -> Result<()> {
        self.post(to, (POINT_TO_POINT, 0), bytes)
    }

    pub async fn recv(&mut self, from: usize) -> Result<Vec<u8>> {
        self.take(from, (POINT_TO_POINT, 0)).await
    }

    /// Broadcast within this worker's grid row from the worker in column
    /// `root_col`. The root passes `Some(payload)`, everyone else `None`.
    pub async fn broadcast_row(&mut self, root_col: usize, payload: Option<Vec<u8>>) -> Result<Vec<u8>> {
        let (row, _) = self.coords();
        let group: Vec<usize> = (0..self.config.q).map(|c| self.config.rank_of(row, c)).collect();
        self.broadcast(ROW, &group, root_col, payload).await
    }

    /// Broadcast within this worker's grid column from the worker in row `root_row`.
    pub async fn broadcast_col(&mut self, root_row: usize, payload: Option<Vec<u8>>) -> Result<Vec<u8>> {
        let (_, col) = self.coords();
        let group: Vec<usize> = (0..self.config.q).map(|r| self.config.rank_of(r, col)).collect();
        self.broadcast(COL, &group, root_row, payload).await
    }

    /// Binomial-tree broadcast: `n - 1` messages, depth `ceil(log2 n)`.
    async fn broadcast(&mut self, kind: u8, group: &[usize], root: usize, payload: Option<Vec<u8>>) -> Result<Vec<u8>> {
        let n = group.len();
        let me = group.iter().position(|&r| r == self.rank).expect("rank in its own group");
        let tag = (kind, self.seq[kind as usize]);
        self.seq[kind as usize] += 1;
        let rel = (me + n - root) % n;
        let is_root = rel == 0;
        if is_root != payload.is_some() {
            return Err(Error::InvalidParam(format!(
                "rank {}: broadcast payload must be supplied by the root only",
                self.rank
            )));
        }
        // the root in grid row 0 (column 0 for column broadcasts) speaks for the step
        let (row, col) = self.coords();
        if is_root && (if kind == ROW { row } else { col }) == 0 {
            let c = if kind == ROW { &self.counters.broadcasts_row } else { &self.counters.broadcasts_col };
            c.fetch_add(1, Ordering::Relaxed);
            self.counters.tree_hops.fetch_add(ceil_log2(n), Ordering::Relaxed);
        }

        let mut data = payload;
        let mut mask = 1;
        while mask < n {
            if rel & mask != 0 {
                let parent = group[(rel - mask + root) % n];
                data = Some(self.take(parent, tag).await?);
                break;
            }
            mask <<= 1;
        }
        let data = data.expect("root or received");
        mask >>= 1;
        while mask > 0 {
            if rel + mask < n {
                let child = group[(rel + mask + root) % n];
                self.post(child, tag, data.clone())?;
            }
            mask >>= 1;
        }
        Ok(data)
    }
}

/// A √p × √p grid of workers plus cumulative traffic counters.
pub struct Grid {
    config: GridConfig,
    mode: GridMode,
    timeout: Duration,
    counters: Arc<SharedCounters>,
}

impl Grid {
    pub fn new(p: usize, mode: GridMode) -> Result<Self> {
        Ok(Grid {
            config: GridConfig::new(p)?,
            mode,
            timeout: Duration::from_secs(120),
            counters: Arc::default(),
        })
    }

    /// Receive timeout used to detect mismatched collectives in threaded mode.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn config(&self) -> GridConfig {
        self.config
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn counters(&self) -> TrafficCounters {
        self.counters.snapshot()
    }

    fn endpoints(&self, progress: &Arc<AtomicU64>) -> Vec<Endpoint> {
        let p = self.config.p;
        let mut senders: Vec<Vec<Sender<Message>>> = (0..p).map(|_| Vec::with_capacity(p)).collect();
        let mut receivers: Vec<Vec<Receiver<Message>>> = (0..p).map(|_| Vec::with_capacity(p)).collect();
        for to_list in senders.iter_mut() {
            for rx_list in receivers.iter_mut() {
                let (tx, rx) = mpsc::channel();
                to_list.push(tx);
                rx_list.push(rx);
            }
        }
        // senders[src][dst] pairs with receivers[dst][src]
        senders
            .into_iter()
            .zip(receivers)
            .enumerate()
            .map(|(rank, (to, from))| Endpoint {
                rank,
                config: self.config,
                to,
                from,
                blocking: self.mode == GridMode::Threaded,
                timeout: self.timeout,
                seq: [0; 3],
                counters: Arc::clone(&self.counters),
                progress: Arc::clone(progress),
            })
            .collect()
    }

    /// Runs `worker` on every rank and returns the results in rank order.
    pub fn run<R, F, Fut>(&self, worker: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(Endpoint) -> Fut + Sync,
        Fut: Future<Output = Result<R>>,
    {
        let progress = Arc::new(AtomicU64::new(0));
        let endpoints = self.endpoints(&progress);
        match self.mode {
            GridMode::Threaded => {
                let worker = &worker;
                let results: Vec<Result<R>> = std::thread::scope(|s| {
                    let handles: Vec<_> = endpoints
                        .into_iter()
                        .map(|ep| s.spawn(move || block_on(worker(ep))))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().unwrap_or(Err(Error::WorkerPanic)))
                        .collect()
                });
                collect_results(results)
            }
            GridMode::RoundRobin => {
                let mut futs: Vec<Option<Pin<Box<Fut>>>> =
                    endpoints.into_iter().map(|ep| Some(Box::pin(worker(ep)))).collect();
                let mut results: Vec<Option<Result<R>>> = futs.iter().map(|_| None).collect();
                let mut cx = Context::from_waker(Waker::noop());
                loop {
                    let before = progress.load(Ordering::Relaxed);
                    let mut finished = false;
                    for (slot, out) in futs.iter_mut().zip(results.iter_mut()) {
                        if let Some(fut) = slot {
                            if let Poll::Ready(r) = fut.as_mut().poll(&mut cx) {
                                *out = Some(r);
                                *slot = None;
                                finished = true;
                            }
                        }
                    }
                    let pending = futs.iter().filter(|f| f.is_some()).count();
                    if pending == 0 {
                        break;
                    }
                    if !finished && progress.load(Ordering::Relaxed) == before {
                        // Dropping the blocked workers closes their channels.
                        futs.clear();
                        for out in results.iter_mut().filter(|o| o.is_none()) {
                            *out = Some(Err(Error::Deadlock(pending)));
                        }
                        break;
                    }
                }
                collect_results(results.into_iter().map(Option::unwrap).collect())
            }
        }
    }
}

/// Prefers the lowest-rank root-cause error over secondary transport errors.
fn collect_results<R>(results: Vec<Result<R>>) -> Result<Vec<R>> {
    let secondary = |e: &Error| matches!(e, Error::TransportClosed(_) | Error::Deadlock(_));
    if results.iter().any(Result::is_err) {
        let mut errs: Vec<Error> = results.into_iter().filter_map(Result::err).collect();
        let idx = errs.iter().position(|e| !secondary(e)).unwrap_or(0);
        return Err(errs.swap_remove(idx));
    }
    Ok(results.into_iter().map(|r| r.ok().unwrap()).collect())
}

fn block_on<F: Future>(fut: F) -> F::Output {
    let mut fut = std::pin::pin!(fut);
    let mut cx = Context::from_waker(Waker::noop());
    loop {
        if let Poll::Ready(v) = fut.as_mut().poll(&mut cx) {
            return v;
        }
        std::thread::yield_now();
    }
}
