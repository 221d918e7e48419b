"""Progressive 0..K-shot training-data emitter (JSON lines)."""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import LogRecord, Template
from .llm_client import DEFAULT_INSTRUCTION, build_prompt


class TooFewExamples(ValueError):
    pass


@dataclass(frozen=True)
class TrainingExample:
    prompt_text: str
    completion_text: str
    shot: int
    task_id: str

    def to_json(self) -> str:
        return json.dumps(
            {"prompt": self.prompt_text, "completion": self.completion_text, "shot": self.shot, "task_id": self.task_id},
            ensure_ascii=False,
        )


def emit(
    meta_set: Sequence[tuple[LogRecord, Template]],
    max_shot: int,
    per_shot_count: Optional[int] = None,
    seed: int = 0,
    instruction: str = DEFAULT_INSTRUCTION,
) -> list[TrainingExample]:
    """Build ``per_shot_count`` examples for every shot level 0..max_shot.

    Each draw picks a task (dataset label) uniformly among those with more
    than ``shot`` examples, a query from that task, and ``shot`` distinct
    other examples of the same task as demonstrations. Output is grouped
    by ascending shot level. ``per_shot_count`` defaults to the size of the
    meta set.
    """
    if max_shot < 0:
        raise ValueError("max_shot must be >= 0")
    if len(meta_set) <= max_shot:
        raise TooFewExamples(f"need more than {max_shot} labeled examples, got {len(meta_set)}")
    if per_shot_count is None:
        per_shot_count = len(meta_set)

    tasks: dict[str, list[int]] = defaultdict(list)
    for i, (record, _) in enumerate(meta_set):
        tasks[record.dataset].append(i)
    task_ids = sorted(tasks)

    rng = random.Random(seed)
    examples = []
    for shot in range(max_shot + 1):
        eligible = [t for t in task_ids if len(tasks[t]) > shot]
        if not eligible:
            raise TooFewExamples(f"no task has more than {shot} examples")
        for _ in range(per_shot_count):
            task = eligible[rng.randrange(len(eligible))]
            members = tasks[task]
            q = members[rng.randrange(len(members))]
            pool = [i for i in members if i != q]
            demo_idx = rng.sample(pool, shot)
            demos = [(meta_set[i][0].content, meta_set[i][1].text) for i in demo_idx]
            query_record, query_template = meta_set[q]
            prompt = build_prompt(demos, query_record.content, instruction=instruction)
            examples.append(TrainingExample(prompt.text, query_template.text, shot, task))
    return examples


def write_jsonl(examples: Sequence[TrainingExample], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(ex.to_json() + "\n")
    return path
