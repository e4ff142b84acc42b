# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

import importlib

from feature_cp import hooks


def get_hooks(name: str) -> dict:
	return dict(getattr(hooks, name, {}) or {})


def get_attr(method_string: str):
	"""Resolve a dotted path like ``package.module.attr``."""
	module_name, _, attr = method_string.rpartition(".")
	if not module_name:
		raise ImportError(f"not a dotted path: {method_string!r}")
	return getattr(importlib.import_module(module_name), attr)


def resolve_hook(name: str, key: str):
	registry = get_hooks(name)
	if key not in registry:
		raise KeyError(f"{key!r} is not registered in {name} (known: {', '.join(sorted(registry))})")
	return get_attr(registry[key])
