//! Mock of the Rucio → FTS → storage data-movement stack: dataflows are
//! fixed file lists partitioned into small batches; batches sit in
//! per-service FIFO queues; active jobs split their service's allocated
//! rate equally and progress exactly under piecewise-constant rates.
//!
//! Endpoints are frozen at batch submission: once a job is handed to the
//! queue its PFNs never change, whatever happens to the service behind it.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Completion slack in bytes. Rates are piecewise-constant and completion
/// times are computed in closed form, so any gap below half a byte is float
/// noise, not unfinished data.
const COMPLETION_EPS_BYTES: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSpec {
    pub lfn: String,
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JobState {
    Queued,
    Active,
    Done,
    Failed,
}

impl JobState {
    pub fn as_str(&self) -> &'static str {
        match self {
            JobState::Queued => "QUEUED",
            JobState::Active => "ACTIVE",
            JobState::Done => "DONE",
            JobState::Failed => "FAILED",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferJob {
    pub lfn: String,
    pub size: u64,
    pub src_pfn: String,
    pub dst_pfn: String,
    pub state: JobState,
    pub bytes_moved: f64,
    pub retries: u32,
    pub batch_id: String,
    /// Service whose path this job rides; fixed at submission.
    pub service_id: String,
}

impl TransferJob {
    pub fn remaining(&self) -> f64 {
        self.size as f64 - self.bytes_moved
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Batch {
    pub batch_id: String,
    pub job_indices: Vec<usize>,
    pub submitted_at: f64,
    pub service_id: String,
}

/// FIFO queue of jobs for one service, capped at `max_active_jobs`
/// concurrently active.
#[derive(Debug, Clone, Default)]
pub struct FtsQueue {
    pending: VecDeque<(String, usize)>,
    active: Vec<(String, usize)>,
    max_active_jobs: usize,
}

impl FtsQueue {
    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }
}

#[derive(Debug, Clone)]
struct PlannedBatch {
    batch_id: String,
    file_indices: Vec<usize>,
}

#[derive(Debug)]
pub struct Dataflow {
    pub dataflow_id: String,
    pub src_rse: String,
    pub dst_rse: String,
    pub files: Vec<FileSpec>,
    pub service_id: String,
    planned: VecDeque<PlannedBatch>,
    batches: Vec<Batch>,
    jobs: Vec<TransferJob>,
    pub completed_at: Option<f64>,
}

impl Dataflow {
    pub fn jobs(&self) -> &[TransferJob] {
        &self.jobs
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    pub fn planned_remaining(&self) -> usize {
        self.planned.len()
    }

    pub fn total_bytes(&self) -> u64 {
        self.files.iter().map(|f| f.size).sum()
    }

    pub fn bytes_moved(&self) -> f64 {
        self.jobs.iter().map(|j| j.bytes_moved).sum()
    }

    pub fn is_done(&self) -> bool {
        self.planned.is_empty()
            && !self.jobs.is_empty()
            && self.jobs.iter().all(|j| j.state == JobState::Done)
    }
}

/// Aggregate snapshot for one dataflow.
#[derive(Debug, Clone, Serialize)]
pub struct DataflowStatus {
    pub dataflow_id: String,
    pub bytes_moved: f64,
    pub total_bytes: u64,
    pub jobs_by_state: BTreeMap<String, usize>,
    pub done: bool,
}

/// What a settle-and-reap pass observed.
#[derive(Debug, Default)]
pub struct ReapOutcome {
    pub completed_batches: Vec<(String, String)>,
    pub completed_dataflows: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedJob {
    pub dataflow_id: String,
    pub lfn: String,
    pub retries: u32,
}

/// Build a deterministic file list totalling exactly `bytes`: equal sizes
/// with the remainder spread one byte at a time over the first files.
pub fn synthesize_files(request_id: &str, bytes: u64, file_count: u64) -> Result<Vec<FileSpec>> {
    if file_count == 0 {
        return Err(Error::InvalidRequest("file_count must be positive".into()));
    }
    if file_count > bytes {
        return Err(Error::InvalidRequest(format!(
            "cannot split {bytes} bytes into {file_count} non-empty files"
        )));
    }
    let base = bytes / file_count;
    let remainder = bytes % file_count;
    Ok((0..file_count)
        .map(|i| FileSpec {
            lfn: format!("/store/{request_id}/f{i:06}"),
            size: base + u64::from(i < remainder),
        })
        .collect())
}

/// Partition file indices, in listed order, into batches of at most
/// `batch_size`.
pub fn plan_batches(file_count: usize, batch_size: usize) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch_size must be positive");
    (0..file_count)
        .collect::<Vec<_>>()
        .chunks(batch_size)
        .map(|c| c.to_vec())
        .collect()
}

#[derive(Debug)]
pub struct TransferEngine {
    dataflows: BTreeMap<String, Dataflow>,
    queues: BTreeMap<String, FtsQueue>,
    last_settled: f64,
    batch_size: usize,
    max_active_jobs: usize,
    max_retries: u32,
    failed: Vec<FailedJob>,
}

impl TransferEngine {
    pub fn new(batch_size: usize, max_active_jobs: usize, max_retries: u32) -> Self {
        TransferEngine {
            dataflows: BTreeMap::new(),
            queues: BTreeMap::new(),
            last_settled: 0.0,
            batch_size,
            max_active_jobs,
            max_retries,
            failed: Vec::new(),
        }
    }

    pub fn dataflow(&self, id: &str) -> Result<&Dataflow> {
        self.dataflows
            .get(id)
            .ok_or_else(|| Error::UnknownDataflow(id.to_string()))
    }

    pub fn dataflows(&self) -> impl Iterator<Item = &Dataflow> {
        self.dataflows.values()
    }

    pub fn queue(&self, service_id: &str) -> Option<&FtsQueue> {
        self.queues.get(service_id)
    }

    pub fn failed_jobs(&self) -> &[FailedJob] {
        &self.failed
    }

    /// Register a dataflow and plan its batches. The file list is fixed at
    /// creation and must total exactly `expected_bytes`.
    pub fn create_dataflow(
        &mut self,
        dataflow_id: &str,
        files: Vec<FileSpec>,
        src_rse: &str,
        dst_rse: &str,
        service_id: &str,
        expected_bytes: u64,
    ) -> Result<()> {
        if self.dataflows.contains_key(dataflow_id) {
            return Err(Error::InvalidRequest(format!(
                "dataflow {dataflow_id} already exists"
            )));
        }
        if files.is_empty() {
            return Err(Error::InvalidRequest("dataflow has no files".into()));
        }
        if files.iter().any(|f| f.size == 0) {
            return Err(Error::InvalidRequest("zero-size file in dataflow".into()));
        }
        let total: u64 = files.iter().map(|f| f.size).sum();
        if total != expected_bytes {
            return Err(Error::InvalidRequest(format!(
                "file sizes sum to {total}, request says {expected_bytes}"
            )));
        }
        let planned = plan_batches(files.len(), self.batch_size)
            .into_iter()
            .enumerate()
            .map(|(i, file_indices)| PlannedBatch {
                batch_id: format!("{dataflow_id}-b{i}"),
                file_indices,
            })
            .collect();
        self.dataflows.insert(
            dataflow_id.to_string(),
            Dataflow {
                dataflow_id: dataflow_id.to_string(),
                src_rse: src_rse.to_string(),
                dst_rse: dst_rse.to_string(),
                files,
                service_id: service_id.to_string(),
                planned,
                batches: Vec::new(),
                jobs: Vec::new(),
                completed_at: None,
            },
        );
        Ok(())
    }

    /// Point future batches of a dataflow at a replacement service.
    /// Already-submitted jobs keep their frozen endpoints.
    pub fn rebind(&mut self, dataflow_id: &str, new_service_id: &str) -> Result<()> {
        let df = self
            .dataflows
            .get_mut(dataflow_id)
            .ok_or_else(|| Error::UnknownDataflow(dataflow_id.to_string()))?;
        df.service_id = new_service_id.to_string();
        Ok(())
    }

    /// Files of the next planned batch, for PFN resolution by the caller.
    pub fn next_batch_files(&self, dataflow_id: &str) -> Result<Option<Vec<FileSpec>>> {
        let df = self.dataflow(dataflow_id)?;
        Ok(df
            .planned
            .front()
            .map(|b| b.file_indices.iter().map(|&i| df.files[i].clone()).collect()))
    }

    /// Hand the next planned batch to the service's queue. PFNs (resolved by
    /// the caller through the service's directors) freeze here. Jobs start
    /// QUEUED; up to `max_active_jobs` go ACTIVE immediately.
    pub fn submit_next_batch(
        &mut self,
        dataflow_id: &str,
        service_id: &str,
        pfns: Vec<(String, String)>,
        now: f64,
    ) -> Result<String> {
        let max_active_jobs = self.max_active_jobs;
        let df = self
            .dataflows
            .get_mut(dataflow_id)
            .ok_or_else(|| Error::UnknownDataflow(dataflow_id.to_string()))?;
        let planned = df
            .planned
            .pop_front()
            .ok_or_else(|| Error::InvalidRequest(format!("no planned batches for {dataflow_id}")))?;
        if pfns.len() != planned.file_indices.len() {
            return Err(Error::InvalidRequest(
                "pfn count does not match batch size".into(),
            ));
        }
        let mut job_indices = Vec::with_capacity(planned.file_indices.len());
        for (&file_idx, (src_pfn, dst_pfn)) in planned.file_indices.iter().zip(pfns) {
            let file = &df.files[file_idx];
            df.jobs.push(TransferJob {
                lfn: file.lfn.clone(),
                size: file.size,
                src_pfn,
                dst_pfn,
                state: JobState::Queued,
                bytes_moved: 0.0,
                retries: 0,
                batch_id: planned.batch_id.clone(),
                service_id: service_id.to_string(),
            });
            job_indices.push(df.jobs.len() - 1);
        }
        df.batches.push(Batch {
            batch_id: planned.batch_id.clone(),
            job_indices: job_indices.clone(),
            submitted_at: now,
            service_id: service_id.to_string(),
        });
        let queue = self
            .queues
            .entry(service_id.to_string())
            .or_insert_with(|| FtsQueue {
                max_active_jobs,
                ..Default::default()
            });
        for idx in job_indices {
            queue.pending.push_back((dataflow_id.to_string(), idx));
        }
        Self::dispatch_queue(queue, &mut self.dataflows);
        Ok(planned.batch_id)
    }

    fn dispatch_queue(queue: &mut FtsQueue, dataflows: &mut BTreeMap<String, Dataflow>) {
        while queue.active.len() < queue.max_active_jobs {
            let Some((df_id, idx)) = queue.pending.pop_front() else {
                break;
            };
            let job = &mut dataflows.get_mut(&df_id).expect("queued dataflow").jobs[idx];
            debug_assert_eq!(job.state, JobState::Queued);
            job.state = JobState::Active;
            queue.active.push((df_id, idx));
        }
    }

    /// Accrue progress for every active job over `[last_settled, now]` at
    /// the given per-service rates (bytes/second). The service rate splits
    /// equally among its active jobs.
    pub fn settle(&mut self, now: f64, service_rates_bytes: &BTreeMap<String, f64>) {
        let dt = now - self.last_settled;
        if dt > 0.0 {
            for (service_id, queue) in &self.queues {
                if queue.active.is_empty() {
                    continue;
                }
                let rate = service_rates_bytes.get(service_id).copied().unwrap_or(0.0);
                let share = rate / queue.active.len() as f64;
                for (df_id, idx) in &queue.active {
                    let job = &mut self
                        .dataflows
                        .get_mut(df_id)
                        .expect("active dataflow")
                        .jobs[*idx];
                    job.bytes_moved = (job.bytes_moved + share * dt).min(job.size as f64);
                }
            }
        }
        self.last_settled = now;
    }

    /// Seconds until the next active job completes anywhere, given
    /// per-service rates in bytes/second. None when nothing is moving.
    pub fn next_completion_dt(&self, service_rates_bytes: &BTreeMap<String, f64>) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (service_id, queue) in &self.queues {
            if queue.active.is_empty() {
                continue;
            }
            let rate = service_rates_bytes.get(service_id).copied().unwrap_or(0.0);
            if rate <= 0.0 {
                continue;
            }
            let share = rate / queue.active.len() as f64;
            for (df_id, idx) in &queue.active {
                let job = &self.dataflows[df_id].jobs[*idx];
                let dt = job.remaining().max(0.0) / share;
                best = Some(best.map_or(dt, |b: f64| b.min(dt)));
            }
        }
        best
    }

    /// Mark jobs that reached their size as DONE, promote queued jobs, and
    /// report completed batches and dataflows. Call after `settle`.
    pub fn reap(&mut self, now: f64) -> ReapOutcome {
        let mut outcome = ReapOutcome::default();
        let service_ids: Vec<String> = self.queues.keys().cloned().collect();
        for service_id in service_ids {
            let queue = self.queues.get_mut(&service_id).expect("queue");
            let mut finished = Vec::new();
            queue.active.retain(|(df_id, idx)| {
                let job = &mut self.dataflows.get_mut(df_id).expect("dataflow").jobs[*idx];
                if job.remaining() <= COMPLETION_EPS_BYTES {
                    job.bytes_moved = job.size as f64;
                    job.state = JobState::Done;
                    finished.push((df_id.clone(), *idx));
                    false
                } else {
                    true
                }
            });
            Self::dispatch_queue(queue, &mut self.dataflows);

            for (df_id, idx) in finished {
                let df = &self.dataflows[&df_id];
                let batch_id = df.jobs[idx].batch_id.clone();
                let batch = df
                    .batches
                    .iter()
                    .find(|b| b.batch_id == batch_id)
                    .expect("batch");
                if batch
                    .job_indices
                    .iter()
                    .all(|&i| df.jobs[i].state == JobState::Done)
                {
                    outcome.completed_batches.push((df_id.clone(), batch_id));
                }
            }
        }
        outcome
            .completed_batches
            .sort();
        outcome.completed_batches.dedup();

        for df in self.dataflows.values_mut() {
            if df.completed_at.is_none() && df.is_done() {
                df.completed_at = Some(now);
                outcome.completed_dataflows.push(df.dataflow_id.clone());
            }
        }
        outcome
    }

    /// Inject a transfer failure into an active job: progress resets, the
    /// retry counter bumps, and the job re-queues at the back until retries
    /// exceed the cap, at which point it fails permanently.
    pub fn fail_job(&mut self, dataflow_id: &str, job_index: usize, _now: f64) -> Result<JobState> {
        let df = self
            .dataflows
            .get_mut(dataflow_id)
            .ok_or_else(|| Error::UnknownDataflow(dataflow_id.to_string()))?;
        let job = df
            .jobs
            .get_mut(job_index)
            .ok_or_else(|| Error::InvalidRequest(format!("no job {job_index} in {dataflow_id}")))?;
        if job.state != JobState::Active {
            return Err(Error::InvalidRequest(format!(
                "job {job_index} in {dataflow_id} is {}, not ACTIVE",
                job.state.as_str()
            )));
        }
        job.bytes_moved = 0.0;
        job.retries += 1;
        let service_id = job.service_id.clone();
        let queue = self.queues.get_mut(&service_id).expect("job has a queue");
        queue
            .active
            .retain(|(df_id, idx)| !(df_id == dataflow_id && *idx == job_index));
        let job = &mut self.dataflows.get_mut(dataflow_id).unwrap().jobs[job_index];
        if job.retries > self.max_retries {
            job.state = JobState::Failed;
            self.failed.push(FailedJob {
                dataflow_id: dataflow_id.to_string(),
                lfn: job.lfn.clone(),
                retries: job.retries,
            });
        } else {
            job.state = JobState::Queued;
            let queue = self.queues.get_mut(&service_id).unwrap();
            queue
                .pending
                .push_back((dataflow_id.to_string(), job_index));
        }
        let queue = self.queues.get_mut(&service_id).unwrap();
        Self::dispatch_queue(queue, &mut self.dataflows);
        Ok(self.dataflows[dataflow_id].jobs[job_index].state)
    }

    /// The path behind `service_id` is gone: every job still in its queue
    /// retries against the dead endpoints until the retry budget runs out
    /// and the failure is surfaced. Returns the number of jobs failed.
    pub fn fail_in_flight(&mut self, service_id: &str, _now: f64) -> usize {
        let Some(queue) = self.queues.get_mut(service_id) else {
            return 0;
        };
        let stranded: Vec<(String, usize)> = queue
            .active
            .drain(..)
            .chain(queue.pending.drain(..))
            .collect();
        let mut failed = 0;
        for (df_id, idx) in stranded {
            let job = &mut self.dataflows.get_mut(&df_id).expect("dataflow").jobs[idx];
            // Each retry restarts from byte zero and immediately fails on
            // the disassembled path.
            job.bytes_moved = 0.0;
            while job.retries <= self.max_retries {
                job.retries += 1;
            }
            job.state = JobState::Failed;
            self.failed.push(FailedJob {
                dataflow_id: df_id.clone(),
                lfn: job.lfn.clone(),
                retries: job.retries,
            });
            failed += 1;
        }
        failed
    }

    /// True if the service has no jobs left in flight (nothing active or
    /// pending in its queue).
    pub fn service_drained(&self, service_id: &str) -> bool {
        self.queues
            .get(service_id)
            .map_or(true, |q| q.active.is_empty() && q.pending.is_empty())
    }

    /// Bytes accrued by jobs bound to one service (across retries the
    /// counter reflects current progress, not wasted work).
    pub fn bytes_moved_for_service(&self, service_id: &str) -> f64 {
        self.dataflows
            .values()
            .flat_map(|df| df.jobs.iter())
            .filter(|j| j.service_id == service_id)
            .map(|j| j.bytes_moved)
            .sum()
    }

    pub fn dataflow_status(&self, dataflow_id: &str) -> Result<DataflowStatus> {
        let df = self.dataflow(dataflow_id)?;
        let mut by_state: BTreeMap<String, usize> = BTreeMap::new();
        for job in &df.jobs {
            *by_state.entry(job.state.as_str().to_string()).or_insert(0) += 1;
        }
        Ok(DataflowStatus {
            dataflow_id: dataflow_id.to_string(),
            bytes_moved: df.bytes_moved(),
            total_bytes: df.total_bytes(),
            jobs_by_state: by_state,
            done: df.is_done(),
        })
    }
}
