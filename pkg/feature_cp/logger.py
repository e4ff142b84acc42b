# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

import logging
import os

_configured = False


def logger(module: str | None = None) -> logging.Logger:
	"""Return the ``feature_cp.<module>`` logger, installing the root handler once."""
	global _configured
	root = logging.getLogger("feature_cp")
	if not _configured:
		handler = logging.StreamHandler()
		handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
		root.addHandler(handler)
		root.setLevel(os.environ.get("FEATURE_CP_LOG_LEVEL", "INFO").upper())
		root.propagate = False
		_configured = True
	return root.getChild(module) if module else root


def log_error(message: str, title: str | None = None) -> None:
	if title:
		message = f"{title}: {message}"
	logger("error").error(message)
