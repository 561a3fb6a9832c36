import sys

from fracnoether.cli import main

sys.exit(main())
