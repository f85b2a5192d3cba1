"""Turn a class-level pattern into an image-level timeline."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .patterns import ConsumptionPattern, InputError

DEFAULT_SIGMA = 1.0
IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp"}


@dataclass(frozen=True)
class DatasetManifest:
    classes: Mapping  # class name -> tuple of image ids

    def __post_init__(self):
        if not self.classes:
            raise InputError("manifest has no classes")
        clean = {}
        for name, ids in self.classes.items():
            ids = tuple(ids)
            if not ids:
                raise InputError(f"class {name!r} has no images")
            if len(set(ids)) != len(ids):
                raise InputError(f"duplicate image ids in class {name!r}")
            clean[name] = ids
        object.__setattr__(self, "classes", clean)

    @property
    def class_names(self) -> list:
        return list(self.classes)


@dataclass
class PreferenceProfile:
    centers: dict = field(default_factory=dict)
    sigmas: dict = field(default_factory=dict)


@dataclass
class SampledTimeline:
    entries: list = field(default_factory=list)  # (t, class name, image id)

    def to_csv(self) -> str:
        lines = ["t,class,image_id"]
        lines += [f"{t},{name},{image_id}" for t, name, image_id in self.entries]
        return "\n".join(lines) + "\n"


def fit_preference(initial_images: Optional[Mapping], assignments: Mapping,
                   rng: np.random.Generator, classes=None) -> PreferenceProfile:
    """Per-class Gaussian over cluster indices.

    Classes with images in ``initial_images`` are centred on the modal cluster
    of those images (lowest index on ties) with the population standard
    deviation of their cluster indices. Every other class gets a uniformly
    random centre and a spread of 1.
    """
    initial_images = initial_images or {}
    names = sorted(classes if classes is not None else assignments)
    profile = PreferenceProfile()
    for name in names:
        if name not in assignments:
            raise InputError(f"no cluster assignment for class {name!r}")
        assignment = assignments[name]
        images = initial_images.get(name)
        if images:
            labels = np.array([assignment.label_of(i) for i in images])
            profile.centers[name] = int(np.argmax(np.bincount(labels)))
            profile.sigmas[name] = float(np.std(labels))
        else:
            profile.centers[name] = int(rng.integers(assignment.n_clusters))
            profile.sigmas[name] = DEFAULT_SIGMA
    return profile


class _ClusterPool:
    """Draws ids without replacement, falling back to with-replacement once empty."""

    def __init__(self, ids, rng):
        self.ids = list(ids)
        self.rng = rng
        self.remaining = list(ids)

    def draw(self):
        if self.remaining:
            return self.remaining.pop(int(self.rng.integers(len(self.remaining))))
        return self.ids[int(self.rng.integers(len(self.ids)))]


def pick_cluster(center: int, sigma: float, n_clusters: int, rng: np.random.Generator) -> int:
    value = rng.normal(center, sigma) if sigma > 0 else float(center)
    return int(min(max(np.rint(value), 0), n_clusters - 1))


def sample_images(pattern: ConsumptionPattern, manifest: DatasetManifest, assignments: Mapping,
                  profile: PreferenceProfile, rng: np.random.Generator,
                  start_t: int = 0) -> SampledTimeline:
    """Draw one image per event of ``pattern`` from a preferred cluster of its class."""
    names = pattern.names
    for name in dict.fromkeys(names):
        if name not in manifest.classes:
            raise InputError(f"class {name!r} not in manifest")
        if name not in assignments:
            raise InputError(f"no cluster assignment for class {name!r}")
        if name not in profile.centers:
            raise InputError(f"no preference profile for class {name!r}")

    pools: dict = {}
    timeline = SampledTimeline()
    for offset, name in enumerate(names):
        assignment = assignments[name]
        cluster = pick_cluster(profile.centers[name], profile.sigmas[name], assignment.n_clusters, rng)
        key = (name, cluster)
        if key not in pools:
            listed = set(manifest.classes[name])
            members = [i for i in assignment.members(cluster) if i in listed]
            if not members:
                raise InputError(f"cluster {cluster} of {name!r} has no manifest images")
            pools[key] = _ClusterPool(members, rng)
        timeline.entries.append((start_t + offset, name, pools[key].draw()))
    return timeline


def read_manifest(path) -> DatasetManifest:
    """Load a ``class,image_id`` CSV, or a directory with one subdirectory per class."""
    path = Path(path)
    classes: dict = {}
    if path.is_dir():
        for sub in sorted(p for p in path.iterdir() if p.is_dir()):
            ids = sorted(f.stem for f in sub.iterdir()
                         if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES)
            if ids:
                classes[sub.name] = ids
        return DatasetManifest(classes)

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and [c.strip() for c in row] == ["class", "image_id"]:
                continue
            if len(row) != 2:
                raise InputError(f"{path}:{lineno}: expected 'class,image_id'")
            classes.setdefault(row[0].strip(), []).append(row[1].strip())
    return DatasetManifest(classes)


def write_manifest(path, manifest: DatasetManifest) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class", "image_id"])
        for name, ids in manifest.classes.items():
            for image_id in ids:
                writer.writerow([name, image_id])


def read_initial_images(path) -> dict:
    """``{class: [image ids]}`` from a ``class,image_id`` CSV of initially eaten images."""
    return {name: list(ids) for name, ids in read_manifest(path).classes.items()}
