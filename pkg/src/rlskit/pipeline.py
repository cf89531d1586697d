"""Task pipelines driven through a shared options store.

A pipeline is an ordered list of task descriptors.  Each task belongs to
one of six categories and is looked up in a registry by
``(category, impl_name)``.  The driver hands every task a read-only view of
the store and appends whatever the task returns under
``results.<category>``.  A descriptor marked ``"inject"`` is not run; its
result must already be in the store and is used as is downstream.
"""
import json
import os
import time
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from . import bigarray
from .errors import (ContractViolation, FormatError, KeyExistsError,
                     PipelineError, RegistryError, TaskError, VersionError)

CATEGORIES = ("split", "kernel", "paramsel", "rls", "pred", "perf")
INJECT = "inject"
FORMAT_VERSION = 1
_MISSING = object()


def _split_key(key):
    parts = key.split(".")
    if not key or any(not p for p in parts):
        raise KeyError(f"invalid options key {key!r}")
    return parts


def _readonly(value):
    if isinstance(value, np.ndarray):
        v = value.view()
        v.flags.writeable = False
        return v
    if isinstance(value, dict):
        return _FrozenNode(value)
    if isinstance(value, list):
        return tuple(_readonly(v) for v in value)
    return value


class _FrozenNode(Mapping):
    """Read-only mapping over one subtree of the store."""

    def __init__(self, node):
        self._node = node

    def __getitem__(self, key):
        node = self._node
        for part in _split_key(key):
            if not isinstance(node, dict) or part not in node:
                raise KeyError(key)
            node = node[part]
        return _readonly(node)

    def __iter__(self):
        return iter(self._node)

    def __len__(self):
        return len(self._node)

    def __contains__(self, key):
        try:
            self[key]
        except KeyError:
            return False
        return True

    def get(self, key, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def _refuse(self, *args, **kwargs):
        raise ContractViolation("tasks receive the options store read-only")

    __setitem__ = __delitem__ = set = update = pop = clear = setdefault = _refuse

    def __setattr__(self, name, value):
        if name != "_node" or "_node" in self.__dict__:
            raise ContractViolation("tasks receive the options store read-only")
        object.__setattr__(self, name, value)

    def __repr__(self):
        return f"<read-only options {sorted(self._node)}>"


class OptionsStore:
    """Tree of dotted keys to values (scalars, strings, lists, arrays).

    Keys are write-once: setting an existing leaf or subtree raises
    ``KeyExistsError``.  ``reset`` removes a subtree explicitly.
    """

    def __init__(self, values=None):
        self._root = {}
        for key, value in (values or {}).items():
            self.set(key, value)

    def set(self, key, value):
        parts = _split_key(key)
        node = self._root
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise KeyExistsError(f"{key!r}: {part!r} already holds a value")
            node = child
        if parts[-1] in node:
            raise KeyExistsError(f"options key {key!r} is already set")
        node[parts[-1]] = _ingest(value)

    def __setitem__(self, key, value):
        self.set(key, value)

    def get(self, key, default=_MISSING):
        node = self._root
        for part in _split_key(key):
            if not isinstance(node, dict) or part not in node:
                if default is _MISSING:
                    raise KeyError(key)
                return default
            node = node[part]
        return node

    def __getitem__(self, key):
        return self.get(key)

    def __contains__(self, key):
        try:
            self.get(key)
        except KeyError:
            return False
        return True

    def reset(self, key):
        parts = _split_key(key)
        node = self._root
        for part in parts[:-1]:
            node = node.get(part, {})
        node.pop(parts[-1], None)

    def view(self):
        return _FrozenNode(self._root)

    def to_dict(self):
        return _copy_tree(self._root)

    def copy(self):
        new = OptionsStore()
        new._root = _copy_tree(self._root)
        return new

    def leaves(self, prefix=""):
        """(dotted_key, value) pairs in insertion order."""
        yield from _walk(self._root, prefix)

    def __eq__(self, other):
        if not isinstance(other, OptionsStore):
            return NotImplemented
        return _tree_equal(self._root, other._root)

    def __repr__(self):
        return f"OptionsStore({sorted(k for k, _ in self.leaves())})"


def _ingest(value):
    if isinstance(value, Mapping):
        return {str(k): _ingest(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return value.copy()
    return value


def _copy_tree(node):
    if isinstance(node, dict):
        return {k: _copy_tree(v) for k, v in node.items()}
    if isinstance(node, np.ndarray):
        return node.copy()
    if isinstance(node, list):
        return [_copy_tree(v) for v in node]
    return node


def _walk(node, prefix):
    for k, v in node.items():
        key = f"{prefix}.{k}" if prefix else k
        if isinstance(v, dict) and v:
            yield from _walk(v, key)
        else:
            yield key, v


def _tree_equal(a, b):
    """Structural equality; arrays and floats compare bit for bit."""
    if isinstance(a, dict) or isinstance(b, dict):
        return (isinstance(a, dict) and isinstance(b, dict) and a.keys() == b.keys()
                and all(_tree_equal(a[k], b[k]) for k in a))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (isinstance(a, np.ndarray) and isinstance(b, np.ndarray)
                and a.dtype == b.dtype and a.shape == b.shape
                and a.tobytes() == b.tobytes())
    if isinstance(a, (list, tuple)) or isinstance(b, (list, tuple)):
        return (type(a) is type(b) and len(a) == len(b)
                and all(_tree_equal(x, y) for x, y in zip(a, b)))
    if isinstance(a, float) and isinstance(b, float):
        return np.float64(a).tobytes() == np.float64(b).tobytes()
    return type(a) is type(b) and a == b


@dataclass(frozen=True)
class RegisteredTask:
    fn: Callable
    requires: tuple = ()


class TaskRegistry:
    def __init__(self):
        self._tasks = {}

    def register(self, category, impl_name, task_fn=None, requires=()):
        """Register ``task_fn``; usable as a decorator when ``task_fn`` is omitted."""
        if category not in CATEGORIES:
            raise RegistryError(f"unknown task category {category!r}; "
                                f"expected one of {CATEGORIES}")
        bad = [r for r in requires if r not in CATEGORIES]
        if bad:
            raise RegistryError(f"unknown required categories {bad}")

        def add(fn):
            if (category, impl_name) in self._tasks:
                raise RegistryError(f"task {category}:{impl_name} is already registered")
            self._tasks[(category, impl_name)] = RegisteredTask(fn, tuple(requires))
            return fn

        return add if task_fn is None else add(task_fn)

    def get(self, category, impl_name):
        try:
            return self._tasks[(category, impl_name)]
        except KeyError:
            raise RegistryError(f"no task registered as {category}:{impl_name}") from None

    def __contains__(self, item):
        return item in self._tasks

    def names(self, category):
        return sorted(i for c, i in self._tasks if c == category)

    def copy(self):
        new = TaskRegistry()
        new._tasks = dict(self._tasks)
        return new


REGISTRY = TaskRegistry()


def register_task(category, impl_name, task_fn=None, requires=(), registry=None):
    return (registry or REGISTRY).register(category, impl_name, task_fn, requires)


@dataclass(frozen=True)
class TaskDescriptor:
    category: str
    impl_name: str
    enabled: Union[bool, str] = True

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise RegistryError(f"unknown task category {self.category!r}")
        if self.enabled not in (True, False, INJECT):
            raise PipelineError(f"enabled must be true, false or {INJECT!r}, "
                                f"got {self.enabled!r}")

    @property
    def name(self):
        return f"{self.category}:{self.impl_name}"


@dataclass
class Pipeline:
    name: str
    tasks: list = field(default_factory=list)

    @classmethod
    def of(cls, name, *specs):
        """Build from ``"category:impl"`` strings (suffix ``!`` to inject)."""
        tasks = []
        for spec in specs:
            inject = spec.endswith("!")
            category, impl = spec.rstrip("!").split(":")
            tasks.append(TaskDescriptor(category, impl, INJECT if inject else True))
        return cls(name, tasks)


def validate_pipeline(p, registry=None, available=()):
    """Check registration and dependency order before anything runs.

    ``available`` lists categories whose results are already in the store.
    """
    registry = registry or REGISTRY
    have = set(available)
    for desc in p.tasks:
        entry = registry.get(desc.category, desc.impl_name)
        if desc.enabled is False:
            continue
        if desc.enabled == INJECT:
            if desc.category not in have:
                raise PipelineError(
                    f"{desc.name} is marked inject but results.{desc.category} "
                    f"is not in the options store")
            continue
        missing = [r for r in entry.requires if r not in have]
        if missing:
            raise PipelineError(f"{desc.name} needs results from {missing}, "
                                f"which no earlier task provides")
        have.add(desc.category)


def run_pipeline(p, opt, registry=None, timings=None):
    """Run the enabled tasks of ``p`` in order, appending results to ``opt``.

    ``timings``, when given, receives wall-clock seconds per executed task
    keyed by category; timing never enters the store.
    """
    registry = registry or REGISTRY
    present = [c for c in CATEGORIES if f"results.{c}" in opt]
    validate_pipeline(p, registry, present)
    for desc in p.tasks:
        if desc.enabled is not True:
            continue
        entry = registry.get(desc.category, desc.impl_name)
        start = time.perf_counter()
        try:
            result = entry.fn(opt.view())
        except ContractViolation:
            raise
        except ValueError as exc:
            if "read-only" in str(exc):
                raise ContractViolation(
                    f"{desc.name} tried to modify the options store: {exc}") from exc
            raise TaskError(desc.category, desc.impl_name, exc) from exc
        except Exception as exc:
            raise TaskError(desc.category, desc.impl_name, exc) from exc
        if timings is not None:
            timings[desc.category] = time.perf_counter() - start
        opt.set(f"results.{desc.category}", result)
    return opt


# --- serialization ---------------------------------------------------------

def _arrays_dir(path):
    path = Path(path)
    return path.with_name(path.name + ".arrays")


def _encode(value, arrays, counter):
    if isinstance(value, dict):
        return {k: _encode(v, arrays, counter) for k, v in value.items()}
    if isinstance(value, tuple):
        return {"__tuple__": [_encode(v, arrays, counter) for v in value]}
    if isinstance(value, list):
        return [_encode(v, arrays, counter) for v in value]
    if isinstance(value, np.ndarray):
        return _encode_array(value, arrays, counter)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise TypeError(f"cannot serialize {type(value).__name__} in options")


def _encode_array(a, arrays, counter):
    kind = a.dtype.kind
    if kind not in "fiub":
        raise TypeError(f"cannot serialize arrays of dtype {a.dtype}")
    ref = {"__array__": None, "dtype": a.dtype.str, "shape": list(a.shape)}
    if a.size == 0 or a.ndim == 0:
        ref["value"] = a.tolist()
        return ref
    if kind in "iu" and a.size and np.max(np.abs(a.astype(np.float64))) >= 2**53:
        raise TypeError("integer array too large to store exactly as float64")
    as2d = a.reshape(a.shape[0], -1) if a.ndim > 1 else a.reshape(-1, 1)
    name = f"{len(counter):04d}.gba"
    counter.append(name)
    bigarray.from_array(arrays / name, np.asarray(as2d, dtype=np.float64),
                        chunk_rows=as2d.shape[0])
    ref["__array__"] = f"{arrays.name}/{name}"
    return ref


def _decode(value, base):
    if isinstance(value, list):
        return [_decode(v, base) for v in value]
    if not isinstance(value, dict):
        return value
    if "__tuple__" in value:
        return tuple(_decode(v, base) for v in value["__tuple__"])
    if "__array__" in value:
        dtype = np.dtype(value["dtype"])
        shape = tuple(value["shape"])
        if value["__array__"] is None:
            return np.array(value["value"], dtype=dtype).reshape(shape)
        data = bigarray.ba_open(base / value["__array__"]).to_numpy()
        return data.astype(dtype).reshape(shape)
    return {k: _decode(v, base) for k, v in value.items()}


def save_options(opt, path):
    """Write ``opt`` as JSON at ``path`` plus one bigarray file per array.

    Arrays live in the sibling directory ``<path>.arrays/`` and are referenced
    by relative path, so the pair can be moved together.
    """
    path = Path(path)
    arrays = _arrays_dir(path)
    arrays.mkdir(parents=True, exist_ok=True)
    for stale in arrays.glob("*.gba"):
        stale.unlink()
    doc = {"format_version": FORMAT_VERSION,
           "options": _encode(opt.to_dict(), arrays, [])}
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=1)
    os.replace(tmp, path)


def load_options(path):
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not an options file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        version = doc.get("format_version") if isinstance(doc, dict) else None
        raise VersionError(f"{path}: unsupported options format_version {version!r}")
    store = OptionsStore()
    store._root = _decode(doc["options"], path.parent)
    return store
