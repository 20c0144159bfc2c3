import sys

from spca.cli import main

sys.exit(main())
