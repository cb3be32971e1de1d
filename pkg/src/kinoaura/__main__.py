import sys

from kinoaura.bench.cli import main

sys.exit(main())
