import sys

from sublinear_lab.cli import main

sys.exit(main())
