//! Background construction of tolerance certificates.
//!
//! Workers receive immutable snapshots, build certificates, and send them
//! back over a channel; the engine swaps results in between steps and
//! silently drops anything whose store epoch is stale.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::engine::accel::rsr_build;
use crate::engine::config::RelaxedCertificate;
use crate::branching::Branch;
use crate::geometry::IntervalBox;
use crate::network::{build_inn, IntervalNetwork, LayerDiff, Network};
use crate::reachability::{margins, reach_inn, OutputSpec, ReachResult, Verdict, VerdictStatus};

pub enum Job {
    Rsr {
        epoch: u64,
        branch: Branch,
        net: Arc<Network>,
        spec: Arc<OutputSpec>,
        offset: f64,
        built_at: usize,
    },
    Inn {
        epoch: u64,
        net: Arc<Network>,
        radius: LayerDiff,
        spec: Arc<OutputSpec>,
        /// `(branch id, input box)` pairs to propagate through the new INN.
        inputs: Vec<(u64, IntervalBox)>,
        built_at: usize,
    },
}

pub enum Done {
    Rsr {
        epoch: u64,
        branch_id: u64,
        cert: RelaxedCertificate,
    },
    Inn {
        epoch: u64,
        built_at: usize,
        inn: Arc<IntervalNetwork>,
        /// Per-branch interval reach and margin-based verdict.
        reaches: Vec<(u64, ReachResult, Verdict)>,
    },
}

fn run_job(job: Job) -> Option<Done> {
    match job {
        Job::Rsr {
            epoch,
            branch,
            net,
            spec,
            offset,
            built_at,
        } => {
            let cert = rsr_build(&branch, &net, &spec, offset, built_at).ok()??;
            Some(Done::Rsr {
                epoch,
                branch_id: branch.id,
                cert,
            })
        }
        Job::Inn {
            epoch,
            net,
            radius,
            spec,
            inputs,
            built_at,
        } => {
            let inn = Arc::new(build_inn(&net, &radius).ok()?);
            let mut reaches = Vec::with_capacity(inputs.len());
            for (id, bbox) in inputs {
                let reach = reach_inn(&inn, &bbox).ok()?;
                let ms = margins(&reach, &spec).ok()?;
                let status = if ms.iter().all(|&m| m >= 0.0) {
                    VerdictStatus::Hold
                } else {
                    VerdictStatus::Unknown
                };
                reaches.push((
                    id,
                    reach,
                    Verdict {
                        status,
                        margins: ms,
                        witness: None,
                    },
                ));
            }
            Some(Done::Inn {
                epoch,
                built_at,
                inn,
                reaches,
            })
        }
    }
}

/// Fixed-size worker pool. Dropping the pool closes the job channel and
/// joins the workers.
pub struct BackgroundPool {
    jobs: Option<Sender<Job>>,
    done: Receiver<Done>,
    handles: Vec<JoinHandle<()>>,
}

impl BackgroundPool {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let (job_tx, job_rx) = channel::<Job>();
        let (done_tx, done_rx) = channel::<Done>();
        let job_rx = Arc::new(Mutex::new(job_rx));
        let mut handles = Vec::with_capacity(workers);
        for _ in 0..workers {
            let rx = Arc::clone(&job_rx);
            let tx = done_tx.clone();
            handles.push(std::thread::spawn(move || loop {
                let job = {
                    let guard = rx.lock().expect("job receiver poisoned");
                    guard.recv()
                };
                match job {
                    Ok(job) => {
                        if let Some(done) = run_job(job) {
                            if tx.send(done).is_err() {
                                return;
                            }
                        }
                    }
                    Err(_) => return, // channel closed
                }
            }));
        }
        BackgroundPool {
            jobs: Some(job_tx),
            done: done_rx,
            handles,
        }
    }

    pub fn schedule(&self, job: Job) {
        if let Some(tx) = &self.jobs {
            let _ = tx.send(job);
        }
    }

    /// Non-blocking drain of finished certificates.
    pub fn try_drain(&self) -> Vec<Done> {
        let mut out = Vec::new();
        while let Ok(done) = self.done.try_recv() {
            out.push(done);
        }
        out
    }

    /// Blocks until all queued work is finished (used by tests).
    pub fn drain_blocking(&self, expected: usize) -> Vec<Done> {
        let mut out = Vec::new();
        while out.len() < expected {
            match self.done.recv() {
                Ok(done) => out.push(done),
                Err(_) => break,
            }
        }
        out
    }
}

impl Drop for BackgroundPool {
    fn drop(&mut self) {
        self.jobs.take();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}
