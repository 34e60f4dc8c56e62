import sys

from folkweave.cli import main

sys.exit(main())
