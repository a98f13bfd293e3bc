"""In-process job registry for long-running training requests."""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field


@dataclass
class Job:
    id: str
    kind: str
    status: str = "queued"  # queued | running | done | failed
    error: str | None = None
    result: dict | None = None

    def as_dict(self):
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "error": self.error,
            "result": self.result,
        }


@dataclass
class JobRegistry:
    max_workers: int = 1
    _jobs: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _counter: int = 0
    _executor: ThreadPoolExecutor | None = None

    def _new_job(self, kind):
        with self._lock:
            self._counter += 1
            job = Job(id=f"job-{self._counter:04d}", kind=kind)
            self._jobs[job.id] = job
        return job

    def _run(self, job, fn):
        job.status = "running"
        try:
            job.result = fn()
            job.status = "done"
        except Exception as exc:  # surfaced via the job record
            job.status = "failed"
            job.error = f"{type(exc).__name__}: {exc}"

    def run_sync(self, kind, fn):
        job = self._new_job(kind)
        self._run(job, fn)
        return job

    def submit(self, kind, fn):
        job = self._new_job(kind)
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.max_workers)
        self._executor.submit(self._run, job, fn)
        return job

    def get(self, job_id):
        with self._lock:
            return self._jobs.get(job_id)

    def all(self):
        with self._lock:
            return list(self._jobs.values())
