import sys

from lts.cli import main

sys.exit(main())
