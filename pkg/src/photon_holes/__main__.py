import sys

from photon_holes.cli import main

sys.exit(main())
