from __future__ import annotations

import importlib.metadata


__all__ = ["tag", "version", "commit"]


# ========= =========== ===================
#           release     development
# ========= =========== ===================
# tag       X.Y         X.Y (upcoming)
# version   X.Y         X.Y.dev0+local
# commit    X.Y         local
# ========= =========== ===================


# When tagging a release, set `released = True`.
# After tagging a release, set `released = False` and increment `tag`.

released = False

tag = version = commit = "0.3"


if not released:  # pragma: no cover

    def get_version(tag: str) -> str:
        # Read version from package metadata if driftlab is installed.
        try:
            return importlib.metadata.version("driftlab")
        except importlib.metadata.PackageNotFoundError:
            return f"{tag}.dev0+local"

    version = get_version(tag)
    commit = "local"
