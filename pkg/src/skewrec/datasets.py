"""Locate or fetch the MovieLens-100K ratings file (``u.data`` layout)."""

from __future__ import annotations

import io
import logging
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

logger = logging.getLogger(__name__)

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
# RecBole ships the same 100,000 ratings as an atomic file inside its wheel
RECBOLE_SPEC = "recbole==1.2.1"
RECBOLE_MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"
N_RATINGS = 100_000


def default_cache_dir() -> Path:
    env = os.environ.get("SKEWREC_DATA")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "skewrec"


def _from_grouplens(timeout: float) -> str:
    with urllib.request.urlopen(GROUPLENS_URL, timeout=timeout) as resp:
        blob = resp.read()
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        return zf.read("ml-100k/u.data").decode("latin-1")


def _from_recbole_wheel() -> str:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, RECBOLE_SPEC],
            check=True,
        )
        (wheel,) = Path(tmp).glob("*.whl")
        with zipfile.ZipFile(wheel) as zf:
            text = zf.read(RECBOLE_MEMBER).decode("utf-8")
    lines = text.splitlines()[1:]  # typed header row
    return "".join(line + "\n" for line in lines if line.strip())


def movielens_100k(cache_dir: str | os.PathLike | None = None, timeout: float = 20.0) -> Path:
    """Path to a tab-separated ``user item rating timestamp`` file with 100,000 rows."""
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    target = cache / "ml-100k" / "u.data"
    if target.exists():
        return target
    errors = []
    for fetch in (lambda: _from_grouplens(timeout), _from_recbole_wheel):
        try:
            text = fetch()
        except Exception as exc:  # network and packaging failures alike
            errors.append(repr(exc))
            logger.info("MovieLens-100K source failed: %r", exc)
            continue
        n = sum(1 for line in text.splitlines() if line.strip())
        if n != N_RATINGS:
            errors.append(f"expected {N_RATINGS} rows, got {n}")
            continue
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, target)
        return target
    raise RuntimeError("could not obtain MovieLens-100K: " + "; ".join(errors))
