import sys
from waistPy.cli import main

sys.exit(main())
