import os
import sys
from pathlib import Path

# Make the in-repo package importable, and pick up the extension from the
# CMake build tree when the test runner points at one.
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
_module_dir = os.environ.get("SECFORGE_MODULE_DIR")
if _module_dir:
    sys.path.insert(0, _module_dir)
