"""Impact-analysis tasks mined from annotated bug-fix commits, and their scoring.

Each commit's set of changed methods (located in the parent-commit
snapshot) yields one task per member: that member is the query and the
others are its ground-truth impact set. Commits touching a single method
are dropped. ``inner``/``outer`` tasks keep only same-file / other-file
ground truth and are discarded when fewer than two methods remain.
"""

from __future__ import annotations

import bisect
import csv
import logging
import os
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from .corpus import Corpus
from .ranking import SETTINGS, RankedImpactList

logger = logging.getLogger(__name__)

__all__ = [
    "ChangeAnnotation",
    "EvalReport",
    "ImpactTask",
    "TaskScore",
    "aggregate",
    "build_tasks",
    "locate_method",
    "read_annotations",
    "score_task",
]

BUGFIX = "bugfix"
ANNOTATION_HEADER = ("repo", "commit", "parent_commit", "file_path", "line", "label")


@dataclass(frozen=True)
class ChangeAnnotation:
    repo: str
    commit_id: str
    parent_commit_id: str
    file_path: str
    line_number: int
    label: str

    def __post_init__(self):
        if self.line_number < 1:
            raise ValueError(f"line_number must be >= 1, got {self.line_number}")


def read_annotations(path: str | os.PathLike[str]) -> list[ChangeAnnotation]:
    """Read the ``repo,commit,parent_commit,file_path,line,label`` CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(ANNOTATION_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"annotation CSV lacks columns: {', '.join(sorted(missing))}")
        out = []
        for lineno, row in enumerate(reader, 2):
            try:
                out.append(
                    ChangeAnnotation(
                        repo=row["repo"],
                        commit_id=row["commit"],
                        parent_commit_id=row["parent_commit"],
                        file_path=row["file_path"],
                        line_number=int(row["line"]),
                        label=row["label"].strip(),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"annotation CSV line {lineno}: {exc}") from None
    return out


@dataclass(frozen=True)
class ImpactTask:
    task_id: str
    commit_id: str
    query_id: int
    ground_truth: frozenset[int]
    setting: str

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.query_id in self.ground_truth:
            raise ValueError(f"task {self.task_id}: query inside its ground truth")
        minimum = 1 if self.setting == "whole" else 2
        if len(self.ground_truth) < minimum:
            raise ValueError(f"task {self.task_id}: ground truth smaller than {minimum}")

    def to_json(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "commit_id": self.commit_id,
            "query_id": self.query_id,
            "ground_truth": sorted(self.ground_truth),
            "setting": self.setting,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> ImpactTask:
        return cls(
            task_id=str(obj["task_id"]),
            commit_id=str(obj["commit_id"]),
            query_id=int(obj["query_id"]),
            ground_truth=frozenset(int(i) for i in obj["ground_truth"]),
            setting=str(obj["setting"]),
        )


class _LineIndex:
    def __init__(self, corpus: Corpus):
        self.starts: dict[str, list[int]] = {}
        self.ids: dict[str, list[int]] = {}
        for path, ids in corpus.file_index.items():
            ordered = sorted(ids, key=lambda i: corpus[i].start_line)
            self.ids[path] = ordered
            self.starts[path] = [corpus[i].start_line for i in ordered]
        self.corpus = corpus

    def find(self, file_path: str, line: int) -> int | None:
        starts = self.starts.get(file_path)
        if not starts:
            return None
        # Innermost enclosing method: scan back from the last start <= line.
        pos = bisect.bisect_right(starts, line) - 1
        while pos >= 0:
            mid = self.ids[file_path][pos]
            if self.corpus[mid].end_line >= line:
                return mid
            pos -= 1
        return None


def locate_method(corpus: Corpus, file_path: str, line_number: int) -> int | None:
    """Id of the method whose [start_line, end_line] contains the line."""
    return _LineIndex(corpus).find(file_path, line_number)


def build_tasks(
    annotations: Iterable[ChangeAnnotation],
    corpora: Mapping[str, Corpus],
    stats: Counter | None = None,
) -> list[ImpactTask]:
    """Tasks for all three settings from bug-fix line annotations.

    ``corpora`` maps a parent commit id to its snapshot. Only lines labelled
    ``bugfix`` are used. ``stats`` (if given) counts dropped lines and
    commits by reason.
    """
    stats = stats if stats is not None else Counter()
    changed: dict[tuple[str, str, str], set[int]] = {}
    indexes: dict[str, _LineIndex] = {}
    for ann in annotations:
        if ann.label != BUGFIX:
            stats["non_bugfix_line"] += 1
            continue
        key = (ann.repo, ann.commit_id, ann.parent_commit_id)
        corpus = corpora.get(ann.parent_commit_id)
        if corpus is None:
            stats["missing_snapshot"] += 1
            logger.warning("no snapshot for parent commit %s; skipping line", ann.parent_commit_id)
            continue
        if ann.parent_commit_id not in indexes:
            indexes[ann.parent_commit_id] = _LineIndex(corpus)
        mid = indexes[ann.parent_commit_id].find(ann.file_path, ann.line_number)
        if mid is None:
            stats["line_outside_method"] += 1
            continue
        changed.setdefault(key, set()).add(mid)

    tasks: dict[tuple[str, int, str], ImpactTask] = {}
    for (repo, commit, parent), members in sorted(changed.items()):
        if len(members) < 2:
            stats["single_method_commit"] += 1
            continue
        corpus = corpora[parent]
        for query in sorted(members):
            rest = members - {query}
            path = corpus[query].file_path
            candidates = {
                "whole": rest,
                "inner": {m for m in rest if corpus[m].file_path == path},
                "outer": {m for m in rest if corpus[m].file_path != path},
            }
            for setting in SETTINGS:
                gt = candidates[setting]
                if setting != "whole" and len(gt) < 2:
                    stats[f"{setting}_too_small"] += 1
                    continue
                key = (commit, query, setting)
                if key in tasks:
                    stats["duplicate_task"] += 1
                    continue
                tasks[key] = ImpactTask(f"{repo}:{commit}:{query}:{setting}", commit, query, frozenset(gt), setting)
    return [tasks[k] for k in sorted(tasks, key=lambda k: (SETTINGS.index(k[2]), k[0], k[1]))]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskScore:
    task_id: str
    first_hit_rank: int | None
    reciprocal_rank: float
    average_precision: float
    hit_at_k: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "first_hit_rank": self.first_hit_rank,
            "reciprocal_rank": self.reciprocal_rank,
            "average_precision": self.average_precision,
            "hit_at_k": self.hit_at_k,
        }


def score_task(task: ImpactTask, ranking: RankedImpactList, k: int = 10) -> TaskScore:
    """Reciprocal rank, average precision and hit@k of one ranked list.

    A task with no ground truth in the list scores 0 for both RR and AP.
    Ground-truth methods missing from the list are left out of the AP
    denominator. ``hit_at_k`` is False when nothing is found.
    """
    if ranking.query_id != task.query_id:
        raise ValueError(f"ranking is for query {ranking.query_id}, task {task.task_id} is {task.query_id}")
    if ranking.setting != task.setting:
        raise ValueError(f"ranking setting {ranking.setting!r} does not match task setting {task.setting!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    hit_ranks = [pos for pos, mid in enumerate(ranking.ids, 1) if mid in task.ground_truth]
    missing = len(task.ground_truth) - len(hit_ranks)
    if missing:
        logger.info("task %s: %d ground-truth methods not in ranking", task.task_id, missing)
    if not hit_ranks:
        return TaskScore(task.task_id, None, 0.0, 0.0, False)
    precisions = [found / pos for found, pos in enumerate(hit_ranks, 1)]
    first = hit_ranks[0]
    return TaskScore(task.task_id, first, 1.0 / first, sum(precisions) / len(precisions), first <= k)


@dataclass(frozen=True)
class EvalReport:
    setting: str
    k: int
    mrr: float
    map: float
    hit_at_k: float
    n_tasks: int
    per_task: tuple[TaskScore, ...] = field(repr=False, default=())

    def to_json(self) -> dict[str, Any]:
        return {
            "aggregates": {
                "setting": self.setting,
                "k": self.k,
                "n_tasks": self.n_tasks,
                "mRR": self.mrr,
                "mAP": self.map,
                f"HIT@{self.k}": self.hit_at_k,
            },
            "per_task": [t.to_json() for t in self.per_task],
        }


def aggregate(records: Sequence[TaskScore], setting: str = "whole", k: int = 10) -> EvalReport:
    """Arithmetic means of the per-task metrics."""
    if not records:
        raise ValueError("cannot aggregate zero tasks")
    n = len(records)
    return EvalReport(
        setting=setting,
        k=k,
        mrr=sum(r.reciprocal_rank for r in records) / n,
        map=sum(r.average_precision for r in records) / n,
        hit_at_k=sum(1 for r in records if r.hit_at_k) / n,
        n_tasks=n,
        per_task=tuple(records),
    )


def evaluate(
    tasks: Iterable[ImpactTask],
    rankings: Iterable[RankedImpactList],
    setting: str,
    k: int = 10,
) -> EvalReport:
    """Score every task of ``setting`` against its ranking."""
    by_query = {(r.query_id, r.setting): r for r in rankings}
    scores = []
    for task in tasks:
        if task.setting != setting:
            continue
        ranking = by_query.get((task.query_id, task.setting))
        if ranking is None:
            raise ValueError(f"no ranking for task {task.task_id} (query {task.query_id}, {task.setting})")
        scores.append(score_task(task, ranking, k))
    return aggregate(scores, setting, k)
