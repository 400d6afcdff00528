from dmace.harness.cli import main

raise SystemExit(main())
