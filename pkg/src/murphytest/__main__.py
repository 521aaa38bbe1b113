import sys

from murphytest.cli import main

sys.exit(main())
