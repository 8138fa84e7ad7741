import sys

from gecforge.cli import main

sys.exit(main())
