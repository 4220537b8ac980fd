import os
import sys

# Under ctest the package comes from the build tree; drop any editable-install
# redirect so that copy is the one imported.
if os.environ.get("CGBENCH_PYPKG"):
    sys.meta_path[:] = [f for f in sys.meta_path if not type(f).__module__.startswith("_editable_skbc_cgbench")]
    sys.path.insert(0, os.environ["CGBENCH_PYPKG"])
