from pathlib import Path

from semicon.controllers.job_controller import JobController
from semicon.models.config_io import load_config
from semicon.models.enums import Split
from semicon.utils.logging_utils import build_logger

tmp = Path("work")
tmp.mkdir(parents=True, exist_ok=True)

cfg = load_config(Path(__file__).parent / "configs" / "desk.cfg")
jobs = JobController(build_logger("semicon", tmp / "logs"))

jobs.train(cfg, tmp / "model.smck")
jobs.encode(tmp / "model.smck", tmp / "db.smcn", maps_dir=tmp / "maps")
jobs.encode(tmp / "model.smck", tmp / "q.smcn", split=Split.QUERY)

report = jobs.evaluate(tmp / "db.smcn", tmp / "q.smcn", tmp / "q.report.txt")
print(f"mAP {report.map:.4f} over {report.query_count} queries")
