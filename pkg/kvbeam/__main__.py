from kvbeam.main import main

raise SystemExit(main())
