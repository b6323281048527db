import sys

from eqfslam.cli import main

sys.exit(main())
