import sys

from treeaug.cli import main

sys.exit(main())
