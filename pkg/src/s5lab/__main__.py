import sys

from s5lab.cli.main import main

sys.exit(main())
