//! Shared service state: datasets, in-memory matrices, build jobs.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use repsel_core::{
    build_matrix, Dataset, DatasetId, DistanceMatrix, MatrixCache, MatrixParams, SelectionParams,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_UPLOAD_LIMIT: usize = 512 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub upload_limit: usize,
    /// Parameters of the matrix built right after an upload.
    pub default_params: SelectionParams,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            cache_dir: cache_dir.into(),
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            default_params: SelectionParams::new(5, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobPhase {
    Ingesting,
    Sampling,
    BuildingMatrix,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub dataset_id: Option<DatasetId>,
    pub params_fingerprint: Option<String>,
    pub phase: JobPhase,
    pub progress: f64,
    pub error: Option<String>,
}

/// Handle to a job's status; updates keep `progress` non-decreasing.
#[derive(Debug, Clone)]
pub struct Job(Arc<Mutex<JobStatus>>);

impl Job {
    pub fn status(&self) -> JobStatus {
        self.0.lock().expect("job lock").clone()
    }

    pub fn id(&self) -> String {
        self.0.lock().expect("job lock").job_id.clone()
    }

    pub fn set_target(&self, dataset_id: &DatasetId, params: &MatrixParams) {
        let mut s = self.0.lock().expect("job lock");
        s.dataset_id = Some(dataset_id.clone());
        s.params_fingerprint = Some(params.fingerprint());
    }

    pub fn advance(&self, phase: JobPhase, progress: f64) {
        let mut s = self.0.lock().expect("job lock");
        if matches!(s.phase, JobPhase::Done | JobPhase::Failed) {
            return;
        }
        s.phase = phase;
        s.progress = s.progress.max(progress.clamp(0.0, 1.0));
    }

    pub fn finish(&self) {
        let mut s = self.0.lock().expect("job lock");
        s.phase = JobPhase::Done;
        s.progress = 1.0;
    }

    pub fn fail(&self, error: String) {
        let mut s = self.0.lock().expect("job lock");
        s.phase = JobPhase::Failed;
        s.error = Some(error);
    }
}

type MatrixKey = (DatasetId, MatrixParams);

/// Outcome of asking for a matrix without building it inline.
pub enum MatrixLookup {
    Ready(Arc<DistanceMatrix>),
    Building(String),
    Missing,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

struct Inner {
    config: ServiceConfig,
    cache: MatrixCache,
    datasets: RwLock<HashMap<DatasetId, Arc<Dataset>>>,
    matrices: RwLock<HashMap<MatrixKey, Arc<DistanceMatrix>>>,
    builds: Mutex<HashMap<MatrixKey, Job>>,
    jobs: RwLock<HashMap<String, Job>>,
    next_job: AtomicU64,
}

impl AppState {
    /// Creates the state, loading any datasets already in the data directory.
    pub fn open(config: ServiceConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(&config.data_dir)?;
        fs::create_dir_all(&config.cache_dir)?;
        let mut datasets = HashMap::new();
        for entry in fs::read_dir(&config.data_dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            match fs::read(&path).map(|b| serde_json::from_slice::<Dataset>(&b)) {
                Ok(Ok(ds)) => {
                    datasets.insert(ds.id.clone(), Arc::new(ds));
                }
                Ok(Err(e)) => {
                    tracing::warn!(path = %path.display(), error = %e, "skipping unreadable dataset")
                }
                Err(e) => {
                    tracing::warn!(path = %path.display(), error = %e, "skipping unreadable dataset")
                }
            }
        }
        tracing::info!(count = datasets.len(), "loaded datasets");
        Ok(Self(Arc::new(Inner {
            cache: MatrixCache::new(&config.cache_dir),
            config,
            datasets: RwLock::new(datasets),
            matrices: RwLock::new(HashMap::new()),
            builds: Mutex::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            next_job: AtomicU64::new(1),
        })))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<Dataset>> {
        self.0
            .datasets
            .read()
            .expect("datasets lock")
            .get(&DatasetId(id.to_string()))
            .cloned()
    }

    pub fn datasets(&self) -> Vec<Arc<Dataset>> {
        let mut all: Vec<_> = self
            .0
            .datasets
            .read()
            .expect("datasets lock")
            .values()
            .cloned()
            .collect();
        all.sort_by(|a, b| a.id.cmp(&b.id));
        all
    }

    /// Publishes a dataset. An id already present keeps the existing value.
    pub fn insert_dataset(&self, dataset: Dataset) -> anyhow::Result<Arc<Dataset>> {
        if let Some(existing) = self.dataset(dataset.id.as_str()) {
            return Ok(existing);
        }
        let path = self.0.config.data_dir.join(format!("{}.json", dataset.id));
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(&dataset)?)?;
        fs::rename(&tmp, &path)?;
        let mut map = self.0.datasets.write().expect("datasets lock");
        Ok(map
            .entry(dataset.id.clone())
            .or_insert_with(|| Arc::new(dataset))
            .clone())
    }

    pub fn new_job(&self, phase: JobPhase) -> Job {
        let seq = self.0.next_job.fetch_add(1, Ordering::Relaxed);
        let job = Job(Arc::new(Mutex::new(JobStatus {
            job_id: format!("job-{seq}"),
            dataset_id: None,
            params_fingerprint: None,
            phase,
            progress: 0.0,
            error: None,
        })));
        self.0
            .jobs
            .write()
            .expect("jobs lock")
            .insert(job.id(), job.clone());
        job
    }

    pub fn job(&self, id: &str) -> Option<JobStatus> {
        self.0
            .jobs
            .read()
            .expect("jobs lock")
            .get(id)
            .map(Job::status)
    }

    /// In-memory matrix, else the disk cache, else the running build.
    pub fn lookup_matrix(
        &self,
        dataset_id: &DatasetId,
        params: &MatrixParams,
    ) -> anyhow::Result<MatrixLookup> {
        let key = (dataset_id.clone(), *params);
        if let Some(m) = self.0.matrices.read().expect("matrices lock").get(&key) {
            return Ok(MatrixLookup::Ready(m.clone()));
        }
        if let Some(job) = self.0.builds.lock().expect("builds lock").get(&key) {
            return Ok(MatrixLookup::Building(job.id()));
        }
        if let Some(m) = self.0.cache.get(dataset_id, params)? {
            let m = Arc::new(m);
            self.0
                .matrices
                .write()
                .expect("matrices lock")
                .insert(key, m.clone());
            return Ok(MatrixLookup::Ready(m));
        }
        Ok(MatrixLookup::Missing)
    }

    /// Registers `job` as the builder for this key unless one is running.
    /// Returns the job that owns the build and whether it is `job` itself.
    fn claim_build(&self, key: &MatrixKey, job: &Job) -> (Job, bool) {
        let mut builds = self.0.builds.lock().expect("builds lock");
        match builds.get(key) {
            Some(existing) => (existing.clone(), false),
            None => {
                builds.insert(key.clone(), job.clone());
                (job.clone(), true)
            }
        }
    }

    /// Builds, caches and publishes the matrix, updating `job` throughout.
    /// Blocking; run on a blocking thread.
    fn run_build(
        &self,
        dataset: &Dataset,
        params: &SelectionParams,
        job: &Job,
    ) -> Result<Arc<DistanceMatrix>, String> {
        let key = (
            dataset.id.clone(),
            MatrixParams::for_selection(dataset, params),
        );
        job.advance(JobPhase::Sampling, 0.0);
        let result = build_matrix(dataset, params, &|f| {
            job.advance(JobPhase::BuildingMatrix, f)
        })
        .map_err(|e| e.to_string())
        .and_then(|m| {
            self.0.cache.put(&m).map_err(|e| e.to_string())?;
            Ok(Arc::new(m))
        });
        match &result {
            Ok(m) => {
                self.0
                    .matrices
                    .write()
                    .expect("matrices lock")
                    .insert(key.clone(), m.clone());
                job.finish();
            }
            Err(e) => job.fail(e.clone()),
        }
        self.0.builds.lock().expect("builds lock").remove(&key);
        result
    }

    /// Starts a background build unless the matrix exists or is being
    /// built. Returns the job tracking it.
    pub fn ensure_matrix(
        &self,
        dataset: Arc<Dataset>,
        params: SelectionParams,
        job: Job,
    ) -> anyhow::Result<Job> {
        let mparams = MatrixParams::for_selection(&dataset, &params);
        job.set_target(&dataset.id, &mparams);
        match self.lookup_matrix(&dataset.id, &mparams)? {
            MatrixLookup::Ready(_) => {
                job.finish();
                return Ok(job);
            }
            MatrixLookup::Building(id) => {
                job.finish();
                let owner = self.0.jobs.read().expect("jobs lock").get(&id).cloned();
                return Ok(owner.unwrap_or(job));
            }
            MatrixLookup::Missing => {}
        }
        let key = (dataset.id.clone(), mparams);
        let (owner, claimed) = self.claim_build(&key, &job);
        if !claimed {
            job.finish();
            return Ok(owner);
        }
        let state = self.clone();
        let build_job = job.clone();
        tokio::task::spawn_blocking(move || {
            if let Err(e) = state.run_build(&dataset, &params, &build_job) {
                tracing::error!(error = %e, "matrix build failed");
            }
        });
        Ok(job)
    }

    /// Builds the matrix inline (on a blocking thread) when nothing is
    /// running for the key. `Err(job_id)` when another build owns it.
    pub async fn build_now(
        &self,
        dataset: Arc<Dataset>,
        params: SelectionParams,
    ) -> Result<Result<Arc<DistanceMatrix>, String>, String> {
        let key = (
            dataset.id.clone(),
            MatrixParams::for_selection(&dataset, &params),
        );
        let job = self.new_job(JobPhase::Sampling);
        job.set_target(&key.0, &key.1);
        let (owner, claimed) = self.claim_build(&key, &job);
        if !claimed {
            job.finish();
            return Err(owner.id());
        }
        let state = self.clone();
        let handle = tokio::task::spawn_blocking(move || state.run_build(&dataset, &params, &job));
        Ok(handle.await.unwrap_or_else(|e| Err(e.to_string())))
    }
}
