"""
DigiWFS Unwrap - Comparison progress tracker

This module tracks the progress of a method comparison so that a long sweep
can be watched from another shell: every update rewrites one JSON file per
job in the progress directory.

Classes:
    CompareProgressTracker: Tracks finished cells of comparison jobs
"""

import json
import logging
import os
import threading
import time
from typing import Any, Dict, Optional

from backend.errors import GridIOError

logger = logging.getLogger(__name__)


class CompareProgressTracker:
    """
    Tracks the cells of comparison jobs.
    Safe to update from the worker threads of a comparison.
    """

    def __init__(self, output_dir: str):
        """
        Initialize the progress tracker.

        Args:
            output_dir (str): Directory to save progress files
        """
        self.output_dir = output_dir
        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as e:
            raise GridIOError(f"Cannot create progress directory {output_dir}: {str(e)}") from e
        self.progress_data: Dict[str, Dict[str, Any]] = {}
        self.lock = threading.Lock()
        logger.info(f"Initialized CompareProgressTracker with output directory: {self.output_dir}")

    def create_job(self, job_id: str, total_cells: int, methods: list) -> str:
        """
        Create a new comparison job.

        Args:
            job_id (str): Unique identifier for the job
            total_cells (int): Number of (method, case) cells
            methods (list): Method strings of the comparison

        Returns:
            str: Job ID
        """
        with self.lock:
            self.progress_data[job_id] = {
                'job_id': job_id,
                'methods': list(methods),
                'total_cells': total_cells,
                'finished_cells': 0,
                'failed_cells': 0,
                'last_cell': None,
                'overall_progress': 0.0,
                'status': 'running',
                'started_at': time.time(),
                'updated_at': time.time(),
                'completed_at': None,
                'error': None,
            }
            self._save_progress(job_id)
            logger.info(f"Created comparison job: {job_id} with {total_cells} cells")
            return job_id

    def update_cell(self, job_id: str, method: str, case: str, failed: bool = False) -> None:
        """
        Record one finished cell.

        Args:
            job_id (str): Job identifier
            method (str): Method of the cell
            case (str): Case label of the cell
            failed (bool): Whether the cell raised
        """
        with self.lock:
            if job_id not in self.progress_data:
                logger.warning(f"Job {job_id} not found")
                return
            job_data = self.progress_data[job_id]
            job_data['finished_cells'] += 1
            if failed:
                job_data['failed_cells'] += 1
            job_data['last_cell'] = f"{method} / {case}"
            job_data['overall_progress'] = 100.0 * job_data['finished_cells'] / max(1, job_data['total_cells'])
            job_data['updated_at'] = time.time()
            self._save_progress(job_id)
            logger.debug(f"Job {job_id}: {job_data['finished_cells']}/{job_data['total_cells']} cells done")

    def complete_job(self, job_id: str) -> None:
        """Mark a job as completed."""
        with self.lock:
            if job_id not in self.progress_data:
                logger.warning(f"Job {job_id} not found")
                return
            job_data = self.progress_data[job_id]
            job_data['status'] = 'completed'
            job_data['overall_progress'] = 100.0
            job_data['completed_at'] = time.time()
            self._save_progress(job_id)
            logger.info(f"Completed comparison job {job_id}")

    def fail_job(self, job_id: str, error_message: str) -> None:
        """
        Mark a job as failed.

        Args:
            job_id (str): Job identifier
            error_message (str): Error message
        """
        with self.lock:
            if job_id not in self.progress_data:
                logger.warning(f"Job {job_id} not found")
                return
            job_data = self.progress_data[job_id]
            job_data['status'] = 'failed'
            job_data['error'] = error_message
            job_data['completed_at'] = time.time()
            self._save_progress(job_id)
            logger.error(f"Failed comparison job {job_id}: {error_message}")

    def get_progress(self, job_id: str) -> Optional[Dict[str, Any]]:
        """
        Get progress for a job, loading it from disk if needed.

        Returns:
            Dict[str, Any]: Copy of the progress data, or None if unknown
        """
        with self.lock:
            if job_id not in self.progress_data:
                progress_file = os.path.join(self.output_dir, f"{job_id}.json")
                if not os.path.exists(progress_file):
                    logger.warning(f"Job {job_id} not found")
                    return None
                try:
                    with open(progress_file, 'r') as f:
                        self.progress_data[job_id] = json.load(f)
                except Exception as e:
                    logger.error(f"Error loading progress file: {str(e)}")
                    return None
            return dict(self.progress_data[job_id])

    def _save_progress(self, job_id: str) -> None:
        progress_file = os.path.join(self.output_dir, f"{job_id}.json")
        tmp_file = progress_file + ".tmp"
        try:
            with open(tmp_file, 'w') as f:
                json.dump(self.progress_data[job_id], f)
            os.replace(tmp_file, progress_file)
        except Exception as e:
            logger.error(f"Error saving progress file: {str(e)}")
