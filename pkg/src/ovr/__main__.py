import sys

from ovr.cli import main

sys.exit(main())
