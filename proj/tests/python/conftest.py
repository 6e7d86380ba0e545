import os
import sys

# Under ctest the module staged in the build tree must win over any
# installed or editable copy.
stage = os.environ.get("LOOPSOUP_PY_STAGE")
if stage:
    sys.meta_path[:] = [f for f in sys.meta_path if "loopsoup" not in type(f).__module__]
    sys.path.insert(0, stage)
    import loopsoup

    assert loopsoup.__file__.startswith(stage), loopsoup.__file__
